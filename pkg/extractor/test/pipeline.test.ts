/**
 * End-to-end smoke test of the acceptance shape: extract embeddings for two
 * disjoint class subsets (>= 200 images total) and push them through the
 * oodkit CLI pipeline with both the LOF and Mahalanobis detectors.  The
 * extractor talks to oodkit only through OODF files and the CLI.
 */

import { execFileSync } from 'child_process'
import { existsSync, mkdtempSync, readFileSync, rmSync } from 'fs'
import { tmpdir } from 'os'
import * as path from 'path'
import { afterAll, beforeAll, describe, expect, it } from 'vitest'

import { extract, parseClassSpec } from '../dist/extract.js'
import { writeImageFolder } from '../dist/fixtures.js'
import { buildTestModel, initBackend, loadModel, saveModel } from '../dist/model.js'
import { readFeatureFile } from '../dist/oodf.js'

const work = mkdtempSync(path.join(tmpdir(), 'pipeline-'))
const files: Record<string, string> = {}

const IN_CLASSES = '0..1' // in-distribution subset
const OUT_CLASSES = '2..3' // disjoint OoD subset

beforeAll(async () => {
  await initBackend()
  const modelDir = path.join(work, 'model')
  await saveModel(buildTestModel(), modelDir)
  const model = await loadModel(modelDir)

  // >= 200 images in total across the disjoint subsets
  await writeImageFolder(path.join(work, 'train'), [0, 1], 60, 11)
  await writeImageFolder(path.join(work, 'test_in'), [0, 1], 30, 22)
  await writeImageFolder(path.join(work, 'test_out'), [2, 3], 30, 33)

  for (const [name, classes] of [
    ['train', IN_CLASSES],
    ['test_in', IN_CLASSES],
    ['test_out', OUT_CLASSES],
  ] as const) {
    const res = await extract({
      model,
      modelDir,
      taps: ['gap'],
      imageDir: path.join(work, name),
      outPrefix: path.join(work, `${name}`),
      classes: parseClassSpec(classes),
    })
    files[name] = res.files['gap']
  }
})

afterAll(() => rmSync(work, { recursive: true, force: true }))

describe('pipeline smoke test through the oodkit CLI', () => {
  it('covers >= 200 images from two disjoint subsets and the OODF files validate', async () => {
    let total = 0
    const seen: Set<bigint>[] = []
    for (const name of ['train', 'test_in', 'test_out'] as const) {
      const f = await readFeatureFile(files[name]) // validates invariants on read
      total += f.rows
      expect(f.kind).toBe('flat')
      expect(f.labels).toBeDefined()
      expect(f.predictedLabels).toBeDefined()
      seen.push(new Set(Array.from(f.labels!)))
    }
    expect(total).toBeGreaterThanOrEqual(200)
    expect(seen[0]).toEqual(new Set([0n, 1n]))
    expect(seen[2]).toEqual(new Set([2n, 3n]))
    // the Python side accepts the same files
    execFileSync('python3', [
      '-c',
      `from oodkit import read_feature_file\n` +
        `ds = read_feature_file(${JSON.stringify(files.train)})\n` +
        `assert ds.features.rows == 120, ds.features.rows`,
    ])
  })

  for (const detector of ['lof', 'mahalanobis']) {
    it(`oodkit pipeline with ${detector} separates the subsets (AUROC > 70)`, () => {
      const outDir = path.join(work, `pipe_${detector}`)
      execFileSync('oodkit', [
        'pipeline',
        '--detector',
        detector,
        '--k',
        '20',
        '--seed',
        '0',
        '--train',
        files.train,
        '--test-in',
        files.test_in,
        '--test-out',
        files.test_out,
        '--benchmark',
        'texture-subsets',
        '--out-dir',
        outDir,
      ])
      const report = JSON.parse(readFileSync(path.join(outDir, 'report.json'), 'utf8'))
      expect(report.detector).toBe(detector)
      expect(report.benchmark).toBe('texture-subsets')
      expect(report.auroc).toBeGreaterThan(70)
      for (const key of ['tnr_at_tpr95', 'auroc', 'dtacc', 'aupr', 'n_in', 'n_out']) {
        expect(report).toHaveProperty(key)
      }
      // Table-style text report came along and carries the metric columns
      const table = readFileSync(path.join(outDir, 'report.txt'), 'utf8')
      expect(table).toContain('TNR at TPR 95%')
      expect(table).toContain(detector)
      expect(existsSync(path.join(outDir, 'scores_test_in_layer_0.csv'))).toBe(true)
    })
  }
})
