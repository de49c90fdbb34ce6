#!/usr/bin/env node
/** render_nrmse --csv <aggregate.csv> --param jxy --out fig.png [--products 100000,1000000] */
import { readFile } from "node:fs/promises";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { buildCurves, parseAggregateCsv, ParamSelector, SchemaError } from "./csv.js";
import { renderSvg, writeFigure } from "./plot.js";

async function run(): Promise<void> {
    const argv = await yargs(hideBin(process.argv))
        .option("csv", { type: "string", demandOption: true, describe: "aggregate CSV path" })
        .option("param", {
            choices: ["jxy", "jz"] as const,
            demandOption: true,
            describe: "which parameter's NRMSE to plot",
        })
        .option("out", { type: "string", demandOption: true, describe: "output image (.svg or .png)" })
        .option("products", {
            type: "string",
            describe: "comma-separated N*K products to overlay (default: all in the CSV)",
        })
        .option("width", { type: "number", default: 800 })
        .option("height", { type: "number", default: 560 })
        .strict()
        .parse();

    const text = await readFile(argv.csv, "utf-8");
    const products = argv.products
        ?.split(",")
        .map((token) => Number(token.trim()))
        .filter((value) => Number.isFinite(value));
    const curves = buildCurves(parseAggregateCsv(text), argv.param as ParamSelector, products);
    const svg = renderSvg(curves, argv.param as ParamSelector, argv.width, argv.height);
    await writeFigure(svg, argv.out);
    console.log(`wrote ${argv.out} (${curves.length} curve(s))`);
}

run().catch((error) => {
    const message = error instanceof SchemaError ? `CSV schema error: ${error.message}` : `${error}`;
    console.error(message);
    process.exit(1);
});
