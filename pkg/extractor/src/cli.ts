#!/usr/bin/env node
/**
 * extract CLI: export per-layer features from a saved classifier.
 *
 *   oodkit-extract --model <dir> --layers gap,stage3 --images <dir> \
 *       [--classes 0..49] [--spatial] [--batch 16] --out <prefix>
 *
 * Writes <prefix>_<layer>.oodf per tap plus <prefix>_manifest.json.
 * Also available: --make-test-model <dir> to create the deterministic
 * test CNN when no pretrained export is at hand.
 */

import { extract, parseClassSpec } from './extract.js'
import { buildTestModel, initBackend, loadModel, saveModel } from './model.js'

interface Args {
  model?: string
  layers?: string
  images?: string
  classes?: string
  out?: string
  spatial: boolean
  batch: number
  makeTestModel?: string
}

function parseArgs(argv: string[]): Args {
  const args: Args = { spatial: false, batch: 16 }
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i]
    const need = (): string => {
      const v = argv[++i]
      if (v === undefined) throw new Error(`missing value for ${flag}`)
      return v
    }
    switch (flag) {
      case '--model':
        args.model = need()
        break
      case '--layers':
        args.layers = need()
        break
      case '--images':
        args.images = need()
        break
      case '--classes':
        args.classes = need()
        break
      case '--out':
        args.out = need()
        break
      case '--spatial':
        args.spatial = true
        break
      case '--batch':
        args.batch = parseInt(need(), 10)
        break
      case '--make-test-model':
        args.makeTestModel = need()
        break
      case '--help':
      case '-h':
        console.log(
          'usage: oodkit-extract --model <dir> --layers <a,b> --images <dir> ' +
            '--out <prefix> [--classes 0..49] [--spatial] [--batch 16]\n' +
            '       oodkit-extract --make-test-model <dir>',
        )
        process.exit(0)
        break
      default:
        throw new Error(`unknown flag ${flag}`)
    }
  }
  return args
}

async function main(): Promise<number> {
  const args = parseArgs(process.argv.slice(2))
  await initBackend()

  if (args.makeTestModel) {
    const model = buildTestModel()
    await saveModel(model, args.makeTestModel)
    console.log(`wrote deterministic test model to ${args.makeTestModel}`)
    return 0
  }

  for (const [flag, value] of Object.entries({
    '--model': args.model,
    '--layers': args.layers,
    '--images': args.images,
    '--out': args.out,
  })) {
    if (!value) throw new Error(`${flag} is required`)
  }

  const model = await loadModel(args.model!)
  const result = await extract({
    model,
    modelDir: args.model,
    taps: args.layers!.split(',').map(s => s.trim()),
    imageDir: args.images!,
    outPrefix: args.out!,
    spatial: args.spatial,
    batchSize: args.batch,
    classes: args.classes ? parseClassSpec(args.classes) : undefined,
  })
  console.log(
    `extracted ${result.imageCount} images -> ${Object.values(result.files).join(', ')}` +
      (result.skipped.length ? ` (skipped ${result.skipped.length})` : ''),
  )
  console.log(`manifest: ${result.manifestPath}`)
  return 0
}

main()
  .then(code => process.exit(code))
  .catch(err => {
    console.error(`oodkit-extract: ${err.message}`)
    process.exit(1)
  })
