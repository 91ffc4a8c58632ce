/**
 * Batched feature extraction from an image folder into OODF files.
 *
 * One OODF file is written per tap point (<outPrefix>_<tap>.oodf), flat for
 * rank-2 taps and for spatial taps when pooledOutput=false the h x w x c
 * activations are transposed to the OODF c x h x w layout.  Every file
 * carries the true labels (from the class subdirectories) and the labels
 * predicted by the classifier head.  A sidecar manifest
 * (<outPrefix>_manifest.json) records the model hash, preprocessing, and
 * per-tap dimensions for reproducibility.
 */

import { promises as fs } from 'fs'
import * as tf from '@tensorflow/tfjs'

import { decodePng, listImages, ImageEntry } from './images.js'
import { Features, writeFeatureFile } from './oodf.js'
import { resolveTaps, weightsHash } from './model.js'

export interface ExtractionJob {
  model: tf.LayersModel
  /** directory the model was loaded from (for the manifest hash); optional */
  modelDir?: string
  /** layer names to export */
  taps: string[]
  imageDir: string
  outPrefix: string
  /** keep spatial layout for rank-4 taps instead of erroring */
  spatial?: boolean
  batchSize?: number
  /** restrict to these class ids (subdirectory names) */
  classes?: Set<number>
  log?: (message: string) => void
}

export interface ExtractionResult {
  files: Record<string, string>
  manifestPath: string
  imageCount: number
  skipped: string[]
  predictedLabels: BigInt64Array
}

interface TapBuffer {
  name: string
  spatial: boolean
  dims: number[] // [d] or [c, h, w]
  chunks: Float32Array[]
}

function toChw(hwc: Float32Array, h: number, w: number, c: number): Float32Array {
  const out = new Float32Array(hwc.length)
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      for (let k = 0; k < c; k++) {
        out[k * h * w + y * w + x] = hwc[(y * w + x) * c + k]
      }
    }
  }
  return out
}

export async function extract(job: ExtractionJob): Promise<ExtractionResult> {
  const { model, taps } = job
  const batchSize = job.batchSize ?? 16
  const log = job.log ?? ((m: string) => process.stderr.write(m + '\n'))

  const inputShape = model.inputs[0].shape as number[]
  const [, inH, inW] = [inputShape[0], inputShape[1], inputShape[2]]
  const tapOutputs = resolveTaps(model, taps)
  const headOutput = model.outputs[0]
  const runner = tf.model({
    inputs: model.inputs,
    outputs: [...tapOutputs, headOutput],
  })

  const entries = await listImages(job.imageDir, job.classes)
  const decoded: { entry: ImageEntry; image: Float32Array; h: number; w: number }[] = []
  const skipped: string[] = []
  for (const entry of entries) {
    try {
      const img = await decodePng(entry.path)
      decoded.push({ entry, image: img.data, h: img.height, w: img.width })
    } catch (err) {
      skipped.push(entry.path)
      log(`skipping undecodable image ${entry.path}: ${(err as Error).message}`)
    }
  }
  if (decoded.length === 0) {
    throw new Error(`${job.imageDir}: no decodable images${job.classes ? ' in class subset' : ''}`)
  }

  const buffers: TapBuffer[] = tapOutputs.map((out, i) => {
    const shape = out.shape as number[] // [null, ...dims]
    if (shape.length === 2) {
      return { name: taps[i], spatial: false, dims: [shape[1]], chunks: [] }
    }
    if (shape.length === 4) {
      const [, h, w, c] = shape
      if (job.spatial) return { name: taps[i], spatial: true, dims: [c, h, w], chunks: [] }
      throw new Error(
        `tap '${taps[i]}' is spatial (${h}x${w}x${c}); pass spatial=true or tap a pooled layer`,
      )
    }
    throw new Error(`tap '${taps[i]}' has unsupported rank ${shape.length}`)
  })

  const labels = new BigInt64Array(decoded.length)
  const predicted = new BigInt64Array(decoded.length)
  decoded.forEach((d, i) => (labels[i] = BigInt(d.entry.classId)))

  for (let start = 0; start < decoded.length; start += batchSize) {
    const batch = decoded.slice(start, start + batchSize)
    const outputs = tf.tidy(() => {
      const stacked = tf.stack(
        batch.map(b => {
          let img = tf.tensor3d(b.image, [b.h, b.w, 3])
          if (b.h !== inH || b.w !== inW) {
            img = tf.image.resizeBilinear(img, [inH, inW])
          }
          return img
        }),
      )
      return runner.predict(stacked) as tf.Tensor[]
    })
    for (let t = 0; t < buffers.length; t++) {
      const data = (await outputs[t].data()) as Float32Array
      const buf = buffers[t]
      if (!buf.spatial) {
        buf.chunks.push(Float32Array.from(data))
      } else {
        const [c, h, w] = buf.dims
        const per = c * h * w
        for (let row = 0; row < batch.length; row++) {
          buf.chunks.push(toChw(data.subarray(row * per, (row + 1) * per), h, w, c))
        }
      }
    }
    const headData = (await outputs[outputs.length - 1].data()) as Float32Array
    const numClasses = headOutput.shape[1] as number
    for (let row = 0; row < batch.length; row++) {
      let best = 0
      for (let k = 1; k < numClasses; k++) {
        if (headData[row * numClasses + k] > headData[row * numClasses + best]) best = k
      }
      predicted[start + row] = BigInt(best)
    }
    outputs.forEach(o => o.dispose())
  }

  const files: Record<string, string> = {}
  for (const buf of buffers) {
    const per = buf.dims.reduce((a, b) => a * b, 1)
    const values = new Float32Array(decoded.length * per)
    let off = 0
    for (const chunk of buf.chunks) {
      values.set(chunk, off)
      off += chunk.length
    }
    const features: Features = buf.spatial
      ? {
          kind: 'spatial',
          layerName: buf.name,
          values,
          rows: decoded.length,
          channels: buf.dims[0],
          height: buf.dims[1],
          width: buf.dims[2],
          labels,
          predictedLabels: predicted,
        }
      : {
          kind: 'flat',
          layerName: buf.name,
          values,
          rows: decoded.length,
          dim: buf.dims[0],
          labels,
          predictedLabels: predicted,
        }
    const path = `${job.outPrefix}_${buf.name}.oodf`
    await writeFeatureFile(features, path)
    files[buf.name] = path
  }

  const manifestPath = `${job.outPrefix}_manifest.json`
  const manifest = {
    model: job.modelDir ?? model.name,
    weights_sha256: job.modelDir ? await weightsHash(job.modelDir) : null,
    preprocessing: `PNG -> RGB f32 in [0,1], bilinear resize to ${inH}x${inW}`,
    taps: Object.fromEntries(buffers.map(b => [b.name, b.dims])),
    image_count: decoded.length,
    skipped,
    classes: job.classes ? [...job.classes].sort((a, b) => a - b) : 'all',
  }
  await fs.writeFile(manifestPath, JSON.stringify(manifest, null, 2) + '\n')
  return {
    files,
    manifestPath,
    imageCount: decoded.length,
    skipped,
    predictedLabels: predicted,
  }
}

/** Parse "0..49" (inclusive) or "0,3,7" into a class-id set. */
export function parseClassSpec(spec: string): Set<number> {
  const out = new Set<number>()
  if (/^\d+\.\.\d+$/.test(spec.trim())) {
    const [lo, hi] = spec.trim().split('..').map(Number)
    for (let c = lo; c <= hi; c++) out.add(c)
    return out
  }
  for (const tok of spec.split(',')) {
    const v = tok.trim()
    if (!/^\d+$/.test(v)) throw new Error(`bad class spec token '${tok}'`)
    out.add(parseInt(v, 10))
  }
  if (out.size === 0) throw new Error('empty class spec')
  return out
}
