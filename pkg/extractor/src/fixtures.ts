/**
 * Deterministic synthetic image classes for smoke runs and tests.
 *
 * Four visually distinct 32x32 textures (bright blob, horizontal gradient,
 * vertical stripes, dark noise) with per-image jitter from a seeded
 * xorshift PRNG, written as class-subdirectory PNG folders.
 */

import { promises as fs } from 'fs'
import * as path from 'path'

import { encodePng } from './images.js'

export class XorShift {
  private state: number
  constructor(seed: number) {
    this.state = seed >>> 0 || 0x9e3779b9
  }

  next(): number {
    let x = this.state
    x ^= x << 13
    x >>>= 0
    x ^= x >> 17
    x ^= x << 5
    x >>>= 0
    this.state = x
    return x / 0x1_0000_0000
  }
}

const SIZE = 32

function texture(classId: number, rng: XorShift): Uint8Array {
  const px = new Uint8Array(SIZE * SIZE * 3)
  const cx = SIZE / 2 + (rng.next() - 0.5) * 8
  const cy = SIZE / 2 + (rng.next() - 0.5) * 8
  const phase = rng.next() * SIZE
  for (let y = 0; y < SIZE; y++) {
    for (let x = 0; x < SIZE; x++) {
      let r = 0
      let g = 0
      let b = 0
      switch (classId % 4) {
        case 0: {
          // bright gaussian blob
          const d2 = (x - cx) ** 2 + (y - cy) ** 2
          const v = 255 * Math.exp(-d2 / 40)
          r = v
          g = v * 0.8
          b = v * 0.3
          break
        }
        case 1: {
          // horizontal gradient, bluish
          r = (255 * x) / SIZE
          g = 60
          b = 255 - (255 * x) / SIZE
          break
        }
        case 2: {
          // vertical stripes
          const on = Math.floor((y + phase) / 4) % 2 === 0
          r = on ? 230 : 20
          g = on ? 230 : 20
          b = on ? 40 : 200
          break
        }
        default: {
          // dark noise
          r = 50 * rng.next()
          g = 50 * rng.next()
          b = 50 * rng.next()
        }
      }
      const i = (y * SIZE + x) * 3
      const jitter = () => (rng.next() - 0.5) * 24
      px[i] = Math.max(0, Math.min(255, r + jitter()))
      px[i + 1] = Math.max(0, Math.min(255, g + jitter()))
      px[i + 2] = Math.max(0, Math.min(255, b + jitter()))
    }
  }
  return px
}

export async function writeImageFolder(
  root: string,
  classIds: number[],
  perClass: number,
  seed: number,
): Promise<number> {
  let count = 0
  for (const classId of classIds) {
    const dir = path.join(root, String(classId))
    await fs.mkdir(dir, { recursive: true })
    const rng = new XorShift(seed * 7919 + classId * 104729 + 1)
    for (let i = 0; i < perClass; i++) {
      const png = encodePng(texture(classId, rng), SIZE, SIZE)
      await fs.writeFile(path.join(dir, `img_${String(i).padStart(4, '0')}.png`), png)
      count++
    }
  }
  return count
}
