/**
 * OODF feature-file container (the oodkit on-disk interface).
 *
 * Layout, all little-endian:
 *   magic "OODF" (4 bytes) | version u16 = 1 | flags u16 | name u16 len + UTF-8
 *   | n u64 | dims (flat: d u64; spatial: c,h,w u64) | payload f32 row-major
 *   | labels i64 * n if flags bit0 | predicted labels i64 * n if flags bit1.
 * Flags: bit0 labels, bit1 predicted labels, bit2 spatial layout.
 */

import { promises as fs } from 'fs'

const MAGIC = 0x4644_4f4f // "OODF" read as LE u32
const VERSION = 1

const FLAG_LABELS = 1
const FLAG_PREDICTED = 2
const FLAG_SPATIAL = 4

export interface FlatFeatures {
  kind: 'flat'
  layerName: string
  /** row-major n x d */
  values: Float32Array
  rows: number
  dim: number
  labels?: BigInt64Array
  predictedLabels?: BigInt64Array
}

export interface SpatialFeatures {
  kind: 'spatial'
  layerName: string
  /** row-major n x c x h x w */
  values: Float32Array
  rows: number
  channels: number
  height: number
  width: number
  labels?: BigInt64Array
  predictedLabels?: BigInt64Array
}

export type Features = FlatFeatures | SpatialFeatures

function checkFinite(values: Float32Array): void {
  for (let i = 0; i < values.length; i++) {
    if (!Number.isFinite(values[i])) {
      throw new Error(`non-finite value at payload index ${i}`)
    }
  }
}

function checkLabels(labels: BigInt64Array | undefined, n: number, what: string): void {
  if (labels === undefined) return
  if (labels.length !== n) {
    throw new Error(`${what} length ${labels.length} does not match row count ${n}`)
  }
  for (const v of labels) {
    if (v < -1n) throw new Error(`${what} below the -1 "unlabeled" sentinel: ${v}`)
  }
}

export function validateFeatures(f: Features): void {
  const per = f.kind === 'flat' ? f.dim : f.channels * f.height * f.width
  if (f.rows < 1 || per < 1) throw new Error(`need n >= 1 and per-row size >= 1`)
  if (f.values.length !== f.rows * per) {
    throw new Error(`payload length ${f.values.length} != ${f.rows} * ${per}`)
  }
  checkFinite(f.values)
  checkLabels(f.labels, f.rows, 'labels')
  checkLabels(f.predictedLabels, f.rows, 'predicted labels')
}

export async function writeFeatureFile(f: Features, path: string): Promise<void> {
  validateFeatures(f)
  const nameBytes = Buffer.from(f.layerName, 'utf8')
  if (nameBytes.length > 0xffff) throw new Error('layer name longer than 65535 bytes')
  const spatial = f.kind === 'spatial'
  const dims = spatial ? [f.channels, f.height, f.width] : [f.dim]
  let flags = 0
  if (f.labels) flags |= FLAG_LABELS
  if (f.predictedLabels) flags |= FLAG_PREDICTED
  if (spatial) flags |= FLAG_SPATIAL

  const headerSize = 4 + 2 + 2 + 2 + nameBytes.length + 8 + 8 * dims.length
  const payloadSize = 4 * f.values.length
  const labelsSize = (f.labels ? 8 * f.rows : 0) + (f.predictedLabels ? 8 * f.rows : 0)
  const buf = Buffer.alloc(headerSize + payloadSize + labelsSize)

  let off = 0
  off = buf.writeUInt32LE(MAGIC, off)
  off = buf.writeUInt16LE(VERSION, off)
  off = buf.writeUInt16LE(flags, off)
  off = buf.writeUInt16LE(nameBytes.length, off)
  off += nameBytes.copy(buf, off)
  off = buf.writeBigUInt64LE(BigInt(f.rows), off)
  for (const d of dims) off = buf.writeBigUInt64LE(BigInt(d), off)
  Buffer.from(f.values.buffer, f.values.byteOffset, payloadSize).copy(buf, off)
  off += payloadSize
  for (const arr of [f.labels, f.predictedLabels]) {
    if (!arr) continue
    Buffer.from(arr.buffer, arr.byteOffset, 8 * f.rows).copy(buf, off)
    off += 8 * f.rows
  }
  await fs.writeFile(path, buf)
}

class Reader {
  private off = 0
  constructor(private buf: Buffer, private path: string) {}

  private need(size: number, what: string): number {
    if (this.off + size > this.buf.length) {
      throw new Error(`${this.path}: truncated file while reading ${what}`)
    }
    const at = this.off
    this.off += size
    return at
  }

  u16(what: string): number {
    return this.buf.readUInt16LE(this.need(2, what))
  }

  u32(what: string): number {
    return this.buf.readUInt32LE(this.need(4, what))
  }

  u64(what: string): number {
    const v = this.buf.readBigUInt64LE(this.need(8, what))
    if (v > BigInt(Number.MAX_SAFE_INTEGER)) throw new Error(`${this.path}: ${what} too large`)
    return Number(v)
  }

  bytes(size: number, what: string): Buffer {
    const at = this.need(size, what)
    return this.buf.subarray(at, at + size)
  }

  f32Array(count: number, what: string): Float32Array {
    const at = this.need(4 * count, what)
    const out = new Float32Array(count)
    for (let i = 0; i < count; i++) out[i] = this.buf.readFloatLE(at + 4 * i)
    return out
  }

  i64Array(count: number, what: string): BigInt64Array {
    const at = this.need(8 * count, what)
    const out = new BigInt64Array(count)
    for (let i = 0; i < count; i++) out[i] = this.buf.readBigInt64LE(at + 8 * i)
    return out
  }
}

export async function readFeatureFile(path: string): Promise<Features> {
  const buf = await fs.readFile(path)
  const r = new Reader(buf, path)
  const magic = r.u32('magic')
  if (magic !== MAGIC) {
    throw new Error(`${path}: bad magic 0x${magic.toString(16)} (expected "OODF")`)
  }
  const version = r.u16('version')
  if (version !== VERSION) throw new Error(`${path}: unsupported OODF version ${version}`)
  const flags = r.u16('flags')
  const nameLen = r.u16('name length')
  const layerName = r.bytes(nameLen, 'layer name').toString('utf8')
  const rows = r.u64('row count')
  const spatial = (flags & FLAG_SPATIAL) !== 0

  let features: Features
  if (spatial) {
    const channels = r.u64('channels')
    const height = r.u64('height')
    const width = r.u64('width')
    const values = r.f32Array(rows * channels * height * width, 'payload')
    features = { kind: 'spatial', layerName, values, rows, channels, height, width }
  } else {
    const dim = r.u64('feature dim')
    const values = r.f32Array(rows * dim, 'payload')
    features = { kind: 'flat', layerName, values, rows, dim }
  }
  if (flags & FLAG_LABELS) features.labels = r.i64Array(rows, 'labels')
  if (flags & FLAG_PREDICTED) features.predictedLabels = r.i64Array(rows, 'predicted labels')
  validateFeatures(features)
  return features
}
