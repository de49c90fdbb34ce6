/**
 * Parsing of the experiment runner's aggregate CSV into NRMSE-vs-K curves.
 *
 * Expected columns: task,N,K,runs,nrmse_jxy,nrmse_jz,rejections,wall_seconds.
 * Rows are grouped by the fixed budget N*K; each group becomes one curve of
 * (K, NRMSE) points sorted by K.
 */

export type ParamSelector = "jxy" | "jz";

export interface AggregateRow {
    task: string;
    n: number;
    k: number;
    runs: number;
    nrmseJxy: number | null;
    nrmseJz: number | null;
}

export interface Curve {
    product: number;
    points: { k: number; nrmse: number }[];
}

export class SchemaError extends Error {}

const REQUIRED = ["task", "N", "K", "runs", "nrmse_jxy", "nrmse_jz"];

function splitLine(line: string): string[] {
    return line.split(",").map((cell) => cell.trim());
}

export function parseAggregateCsv(text: string): AggregateRow[] {
    const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
    if (lines.length === 0) {
        throw new SchemaError("empty CSV: no header row");
    }
    const header = splitLine(lines[0]);
    const index = new Map(header.map((name, i) => [name, i]));
    for (const column of REQUIRED) {
        if (!index.has(column)) {
            throw new SchemaError(`missing required column '${column}' in header: ${lines[0]}`);
        }
    }
    const rows: AggregateRow[] = [];
    for (const line of lines.slice(1)) {
        const cells = splitLine(line);
        const cell = (name: string) => cells[index.get(name)!] ?? "";
        const numeric = (name: string): number => {
            const value = Number(cell(name));
            if (!Number.isFinite(value)) {
                throw new SchemaError(`non-numeric value '${cell(name)}' in column '${name}': ${line}`);
            }
            return value;
        };
        const optional = (name: string): number | null =>
            cell(name) === "" ? null : numeric(name);
        rows.push({
            task: cell("task"),
            n: numeric("N"),
            k: numeric("K"),
            runs: numeric("runs"),
            nrmseJxy: optional("nrmse_jxy"),
            nrmseJz: optional("nrmse_jz"),
        });
    }
    return rows;
}

export function buildCurves(
    rows: AggregateRow[],
    param: ParamSelector,
    products?: number[],
): Curve[] {
    const byProduct = new Map<number, { k: number; nrmse: number }[]>();
    for (const row of rows) {
        const product = row.n * row.k;
        if (products !== undefined && !products.includes(product)) {
            continue;
        }
        const nrmse = param === "jxy" ? row.nrmseJxy : row.nrmseJz;
        if (nrmse === null) {
            throw new SchemaError(
                `empty nrmse_${param} value for row with N=${row.n}, K=${row.k}`,
            );
        }
        if (!byProduct.has(product)) {
            byProduct.set(product, []);
        }
        byProduct.get(product)!.push({ k: row.k, nrmse });
    }
    if (byProduct.size === 0) {
        throw new SchemaError(`no usable nrmse_${param} rows found`);
    }
    return [...byProduct.entries()]
        .sort(([a], [b]) => a - b)
        .map(([product, points]) => ({
            product,
            points: points.sort((a, b) => a.k - b.k),
        }));
}
