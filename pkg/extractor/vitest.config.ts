import { defineConfig } from 'vitest/config'

export default defineConfig({
  test: {
    include: ['test/**/*.test.ts'],
    testTimeout: 240_000,
    hookTimeout: 240_000,
    // tfjs keeps a worker-ish event loop alive; threads isolate cleanly
    pool: 'forks',
  },
})
