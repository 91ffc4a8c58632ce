/**
 * Image-folder walking and PNG decoding.
 *
 * A dataset folder holds one subdirectory per integer class id, each with
 * PNG files; rows are ordered by (classId, filename) so extraction output
 * is stable regardless of filesystem enumeration order.
 */

import { promises as fs } from 'fs'
import * as path from 'path'
import { PNG } from 'pngjs'

export interface ImageEntry {
  path: string
  classId: number
}

export interface DecodedImage {
  /** height x width x 3, float32 in [0, 1] */
  data: Float32Array
  height: number
  width: number
}

export async function listImages(root: string, classFilter?: Set<number>): Promise<ImageEntry[]> {
  const entries: ImageEntry[] = []
  const classDirs = (await fs.readdir(root, { withFileTypes: true }))
    .filter(e => e.isDirectory() && /^\d+$/.test(e.name))
    .map(e => ({ classId: parseInt(e.name, 10), dir: path.join(root, e.name) }))
    .sort((a, b) => a.classId - b.classId)
  if (classDirs.length === 0) {
    throw new Error(`${root}: no integer-named class subdirectories found`)
  }
  for (const { classId, dir } of classDirs) {
    if (classFilter && !classFilter.has(classId)) continue
    const files = (await fs.readdir(dir)).filter(f => f.toLowerCase().endsWith('.png')).sort()
    for (const f of files) entries.push({ path: path.join(dir, f), classId })
  }
  return entries
}

export async function decodePng(file: string): Promise<DecodedImage> {
  const raw = await fs.readFile(file)
  const png = PNG.sync.read(raw) // throws on undecodable input
  const { width, height, data } = png // RGBA u8
  const out = new Float32Array(height * width * 3)
  for (let i = 0, j = 0; i < data.length; i += 4, j += 3) {
    out[j] = data[i] / 255
    out[j + 1] = data[i + 1] / 255
    out[j + 2] = data[i + 2] / 255
  }
  return { data: out, height, width }
}

export function encodePng(pixels: Uint8Array, width: number, height: number): Buffer {
  const png = new PNG({ width, height })
  for (let i = 0, j = 0; i < width * height; i++, j += 3) {
    png.data[4 * i] = pixels[j]
    png.data[4 * i + 1] = pixels[j + 1]
    png.data[4 * i + 2] = pixels[j + 2]
    png.data[4 * i + 3] = 255
  }
  return PNG.sync.write(png)
}
