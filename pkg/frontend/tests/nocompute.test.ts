/** The client must never compute a detection cost or error rate itself:
 *  every displayed number originates from an API payload. Enforced two
 *  ways: the sentinel-value contract tests elsewhere, and this source
 *  audit for cost arithmetic. */

import { readFileSync, readdirSync } from 'node:fs'
import { dirname, join } from 'node:path'
import { fileURLToPath } from 'node:url'

import { describe, expect, it } from 'vitest'

const SRC = join(dirname(fileURLToPath(import.meta.url)), '..', 'src')

// arithmetic on cost/rate payload fields, or any use of beta in a formula
const FORBIDDEN = [
  /p_miss\s*[+\-*/]/,
  /p_fa\s*[+\-*/]/,
  /[+\-*/]\s*beta\b/,
  /\bbeta\s*[*+]/,
  /c_norm\s*[+\-*/]/,
  /best_actual\s*[+\-*/]/,
  /min_cost\s*[+\-*/]/,
  /actual\s*[+\-*/]\s*\d/,
]

describe('no client-side cost computation', () => {
  const files = readdirSync(SRC).filter((f) => f.endsWith('.ts'))

  it('covers the source tree', () => {
    expect(files.length).toBeGreaterThanOrEqual(8)
  })

  for (const file of readdirSync(SRC).filter((f) => f.endsWith('.ts'))) {
    it(`${file} contains no cost arithmetic`, () => {
      const text = readFileSync(join(SRC, file), 'utf-8')
      for (const pattern of FORBIDDEN) {
        expect(text).not.toMatch(pattern)
      }
    })
  }
})
