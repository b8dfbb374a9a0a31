#!/usr/bin/env node
// Minimal SMT-LIB 2 front-end for the z3-solver WASM build.
// Reads a query from the file given as the last argument (or stdin when
// absent or "-") and prints the solver's output (sat/unsat/unknown).
// Exits 0 on any solver verdict; nonzero on usage or engine errors.

"use strict";

const fs = require("fs");

async function readInput(path) {
  if (!path || path === "-" || path === "/dev/stdin") {
    return fs.readFileSync(0, "utf8");
  }
  return fs.readFileSync(path, "utf8");
}

async function main() {
  const args = process.argv.slice(2).filter((a) => !a.startsWith("--"));
  const text = await readInput(args[args.length - 1]);
  const { init } = require("z3-solver");
  const { Z3 } = await init();
  const cfg = Z3.mk_config();
  const ctx = Z3.mk_context(cfg);
  Z3.del_config(cfg);
  try {
    const out = await Z3.eval_smtlib2_string(ctx, text);
    process.stdout.write(out.endsWith("\n") ? out : out + "\n");
  } finally {
    Z3.del_context(ctx);
  }
  // The WASM runtime keeps worker threads alive; exit explicitly.
  process.exit(0);
}

main().catch((err) => {
  process.stderr.write(String(err && err.stack ? err.stack : err) + "\n");
  process.exit(1);
});
