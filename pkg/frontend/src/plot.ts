/**
 * Log-log NRMSE-vs-K rendering: one curve per fixed preparation budget N*K.
 *
 * Charts are laid out by echarts in server-side SVG mode (deterministic:
 * animations are off and no raster metadata is involved); PNG output
 * rasterizes that SVG.
 */
import * as echarts from "echarts";

import { Curve, ParamSelector } from "./csv.js";

export interface FigureSpec {
    csvPath: string;
    param: ParamSelector;
    products?: number[];
    outPath: string;
    width?: number;
    height?: number;
}

const PARAM_LABEL: Record<ParamSelector, string> = {
    jxy: "NRMSE of the in-plane exchange constant",
    jz: "NRMSE of the axial exchange constant",
};

function formatProduct(product: number): string {
    const exponent = Math.log10(product);
    if (Number.isInteger(exponent)) {
        return `N*K = 10^${exponent}`;
    }
    return `N*K = ${product}`;
}

export function renderSvg(
    curves: Curve[],
    param: ParamSelector,
    width = 800,
    height = 560,
): string {
    const chart = echarts.init(null, null, {
        renderer: "svg",
        ssr: true,
        width,
        height,
    });
    chart.setOption({
        animation: false,
        title: { text: PARAM_LABEL[param], left: "center" },
        legend: { bottom: 0, data: curves.map((c) => formatProduct(c.product)) },
        grid: { left: 70, right: 30, top: 50, bottom: 70 },
        xAxis: {
            type: "log",
            name: "preparations per state K",
            nameLocation: "middle",
            nameGap: 28,
        },
        yAxis: {
            type: "log",
            name: `NRMSE (${param})`,
            nameLocation: "middle",
            nameGap: 50,
        },
        series: curves.map((curve) => ({
            name: formatProduct(curve.product),
            type: "line",
            symbol: "circle",
            symbolSize: 7,
            data: curve.points.map((p) => [p.k, p.nrmse]),
        })),
    });
    const svg = chart.renderToSVGString();
    chart.dispose();
    return svg;
}

export async function writeFigure(svg: string, outPath: string): Promise<void> {
    const { writeFile } = await import("node:fs/promises");
    if (outPath.endsWith(".svg")) {
        await writeFile(outPath, svg, "utf-8");
        return;
    }
    if (outPath.endsWith(".png")) {
        const { Resvg } = await import("@resvg/resvg-js");
        const png = new Resvg(svg).render().asPng();
        await writeFile(outPath, png);
        return;
    }
    throw new Error(`unsupported output extension: ${outPath} (use .svg or .png)`);
}
