/**
 * Figure renderer CLI:  plots <kind> --in DIR --out FILE
 *
 * Exit codes: 0 success, 2 usage or schema error (with the offending column
 * or table named on stderr).
 */

import { writeFileSync } from "fs";
import { SchemaError } from "./csv.js";
import { FIGURE_KINDS, FigureKind, render } from "./figures.js";

function usage(): string {
  return `usage: plots <${FIGURE_KINDS.join("|")}> --in DIR --out FILE`;
}

export function main(argv: string[]): number {
  const args = [...argv];
  const kind = args.shift();
  let dir: string | undefined;
  let out: string | undefined;
  while (args.length > 0) {
    const flag = args.shift();
    if (flag === "--in") dir = args.shift();
    else if (flag === "--out") out = args.shift();
    else {
      process.stderr.write(`unknown argument '${flag}'\n${usage()}\n`);
      return 2;
    }
  }
  if (!kind || !dir || !out || !FIGURE_KINDS.includes(kind as FigureKind)) {
    process.stderr.write(usage() + "\n");
    return 2;
  }
  try {
    writeFileSync(out, render(kind as FigureKind, dir));
  } catch (err) {
    if (err instanceof SchemaError) {
      process.stderr.write(`schema error: ${err.message}\n`);
      return 2;
    }
    throw err;
  }
  process.stdout.write(out + "\n");
  return 0;
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
