import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    include: ['tests/**/*.test.ts'],
    environment: 'node',
    // the integration test spawns the real service and waits for generations
    testTimeout: 60_000,
    hookTimeout: 30_000,
  },
});
