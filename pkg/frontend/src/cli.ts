#!/usr/bin/env node
/** Command line: llb-figures render --spec FILE
 *
 * Exit codes: 0 rendered (warnings allowed), 1 schema/data/spec error,
 * 2 usage error.
 */

import { loadFigureSpec } from "./figspec.js";
import { renderFigure } from "./render.js";

const USAGE = "usage: llb-figures render --spec FILE";

export function cliMain(argv: string[]): number {
  if (argv.length === 0 || argv[0] !== "render") {
    console.error(USAGE);
    return 2;
  }
  let specPath: string | undefined;
  const rest = argv.slice(1);
  for (let i = 0; i < rest.length; i++) {
    if (rest[i] === "--spec" && i + 1 < rest.length) {
      specPath = rest[i + 1];
      i++;
    } else {
      console.error(`unknown argument "${rest[i]}"\n${USAGE}`);
      return 2;
    }
  }
  if (!specPath) {
    console.error(USAGE);
    return 2;
  }
  try {
    const spec = loadFigureSpec(specPath);
    const result = renderFigure(spec);
    for (const w of result.warnings) console.error(`warning: ${w}`);
    console.log(result.output);
    return 0;
  } catch (err) {
    const e = err as NodeJS.ErrnoException;
    if (e.code === "ENOENT") {
      console.error(`error: file not found: ${e.path ?? specPath}`);
      return 1;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (process.argv[1] && /cli\.(js|ts)$/.test(process.argv[1])) {
  process.exit(cliMain(process.argv.slice(2)));
}
