/**
 * Classifier loading, saving, and tap-point resolution.
 *
 * Models are tfjs LayersModels stored as a directory with model.json
 * (topology + weights manifest) and weights.bin.  buildTestModel creates a
 * small deterministic CNN (seeded initializers, zero biases) for smoke
 * runs where no pretrained network is available; real exports follow the
 * same container.
 */

import { createHash } from 'crypto'
import { promises as fs } from 'fs'
import * as path from 'path'
import * as tf from '@tensorflow/tfjs'

export async function initBackend(): Promise<void> {
  await tf.setBackend('cpu')
  await tf.ready()
}

function joinWeightData(data: ArrayBuffer | ArrayBuffer[]): ArrayBuffer {
  if (!Array.isArray(data)) return data
  const total = data.reduce((s, b) => s + b.byteLength, 0)
  const out = new Uint8Array(total)
  let off = 0
  for (const b of data) {
    out.set(new Uint8Array(b), off)
    off += b.byteLength
  }
  return out.buffer
}

export async function saveModel(model: tf.LayersModel, dir: string): Promise<void> {
  await fs.mkdir(dir, { recursive: true })
  await model.save(
    tf.io.withSaveHandler(async artifacts => {
      const weightData = joinWeightData(artifacts.weightData as ArrayBuffer | ArrayBuffer[])
      await fs.writeFile(path.join(dir, 'weights.bin'), Buffer.from(weightData))
      const manifest = {
        modelTopology: artifacts.modelTopology,
        weightsManifest: [{ paths: ['weights.bin'], weights: artifacts.weightSpecs }],
      }
      await fs.writeFile(path.join(dir, 'model.json'), JSON.stringify(manifest))
      return {
        modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: 'JSON' as const },
      }
    }),
  )
}

export async function loadModel(dir: string): Promise<tf.LayersModel> {
  const manifest = JSON.parse(await fs.readFile(path.join(dir, 'model.json'), 'utf8'))
  const weights = await fs.readFile(path.join(dir, 'weights.bin'))
  return tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: manifest.modelTopology,
      weightSpecs: manifest.weightsManifest[0].weights,
      weightData: weights.buffer.slice(weights.byteOffset, weights.byteOffset + weights.byteLength),
    }),
  )
}

export async function weightsHash(dir: string): Promise<string> {
  const bytes = await fs.readFile(path.join(dir, 'weights.bin'))
  return createHash('sha256').update(bytes).digest('hex')
}

export interface TestModelOptions {
  inputSize?: number
  numClasses?: number
  seed?: number
  /** channel width of the deepest conv stage */
  channels?: number
}

/**
 * Deterministic little CNN: conv/pool x2, a deepest conv stage ("stage3"),
 * global average pooling ("gap"), then a softmax head ("head").
 */
export function buildTestModel(options: TestModelOptions = {}): tf.LayersModel {
  const { inputSize = 32, numClasses = 4, seed = 7, channels = 32 } = options
  const init = (s: number) => tf.initializers.glorotUniform({ seed: seed + s })
  const input = tf.input({ shape: [inputSize, inputSize, 3], name: 'image' })
  let x = tf.layers
    .conv2d({
      filters: 16,
      kernelSize: 3,
      padding: 'same',
      activation: 'relu',
      kernelInitializer: init(1),
      useBias: false,
      name: 'stage1',
    })
    .apply(input) as tf.SymbolicTensor
  x = tf.layers.maxPooling2d({ poolSize: 2, name: 'pool1' }).apply(x) as tf.SymbolicTensor
  x = tf.layers
    .conv2d({
      filters: channels,
      kernelSize: 3,
      padding: 'same',
      activation: 'relu',
      kernelInitializer: init(2),
      useBias: false,
      name: 'stage2',
    })
    .apply(x) as tf.SymbolicTensor
  x = tf.layers.maxPooling2d({ poolSize: 2, name: 'pool2' }).apply(x) as tf.SymbolicTensor
  x = tf.layers
    .conv2d({
      filters: channels,
      kernelSize: 3,
      padding: 'same',
      activation: 'relu',
      kernelInitializer: init(3),
      useBias: false,
      name: 'stage3',
    })
    .apply(x) as tf.SymbolicTensor
  const pooled = tf.layers
    .globalAveragePooling2d({ name: 'gap' })
    .apply(x) as tf.SymbolicTensor
  const head = tf.layers
    .dense({
      units: numClasses,
      activation: 'softmax',
      kernelInitializer: init(4),
      useBias: false,
      name: 'head',
    })
    .apply(pooled) as tf.SymbolicTensor
  return tf.model({ inputs: input, outputs: head, name: 'oodkit_test_cnn' })
}

/** Resolve tap-point layer names to symbolic outputs; fails listing options. */
export function resolveTaps(model: tf.LayersModel, taps: string[]): tf.SymbolicTensor[] {
  const available = model.layers.map(l => l.name)
  return taps.map(name => {
    const layer = model.layers.find(l => l.name === name)
    if (!layer) {
      throw new Error(`tap point '${name}' not found; model layers: ${available.join(', ')}`)
    }
    return layer.output as tf.SymbolicTensor
  })
}
