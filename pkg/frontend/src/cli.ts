#!/usr/bin/env node
/**
 * CLI: render --artifact DIR [--artifact DIR2] --metric M [--classes 0,9] --out FILE
 */

import { parseArgs } from "node:util";

import { MetricName, METRIC_NAMES, render } from "./render.js";

export function main(argv: string[]): number {
  if (argv[0] !== "render") {
    process.stderr.write("usage: mfwlab-render render --artifact DIR [--artifact DIR2] --metric M [--classes 0,9] --out FILE\n");
    return 2;
  }
  let parsed;
  try {
    parsed = parseArgs({
      args: argv.slice(1),
      options: {
        artifact: { type: "string", multiple: true },
        metric: { type: "string" },
        classes: { type: "string" },
        out: { type: "string" },
      },
    });
  } catch (e) {
    process.stderr.write(`${(e as Error).message}\n`);
    return 2;
  }
  const { artifact, metric, classes, out } = parsed.values;
  if (!artifact?.length || !metric || !out) {
    process.stderr.write("render requires --artifact, --metric and --out\n");
    return 2;
  }
  try {
    const path = render({
      artifactDirs: artifact,
      metric: metric as MetricName,
      classes: classes ? classes.split(",").map(Number) : undefined,
      output: out,
    });
    process.stdout.write(`wrote ${path}\n`);
    return 0;
  } catch (e) {
    process.stderr.write(`error: ${(e as Error).message}\n`);
    return 1;
  }
}

if (process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop()!)) {
  process.exit(main(process.argv.slice(2)));
}

export { METRIC_NAMES };
