/* tslint:disable */
/* eslint-disable */

/**
 * A standardized 2-d dataset split into indexed points and held-out queries.
 */
export class Playground {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Bin of every indexed point under `method`.
     */
    assignment(method: string): Uint32Array;
    /**
     * Top-ranked bin at the centre of every cell of a `cols` x `rows` grid
     * over `[x0, x1] x [y0, y1]`, row by row from `y0`.
     */
    bin_map(method: string, cols: number, rows: number, x0: number, x1: number, y0: number, y1: number): Uint32Array;
    /**
     * Recall@k against mean candidate count for every `m'` of both methods,
     * as JSON.
     */
    curves(k: number): string;
    /**
     * Bin sizes of `method` over the indexed points.
     */
    histogram(method: string): Uint32Array;
    is_empty(): boolean;
    labels(): Uint32Array;
    len(): number;
    /**
     * `kind` is `moons`, `circles` or `blobs`; a fifth of the points are held
     * out as queries for the recall curves.
     */
    constructor(kind: string, n: number, noise: number, seed: number);
    /**
     * Indexed points as interleaved x, y coordinates.
     */
    points(): Float64Array;
    /**
     * Candidate set of the `m_prime` best bins at `(x, y)`, the `k` nearest
     * points found inside it and the exact `k` nearest, as JSON.
     */
    probe(method: string, x: number, y: number, k: number, m_prime: number): string;
    /**
     * Trains an MLP partitioner and a k-means baseline with `m` bins and
     * returns the learned bin of every indexed point.
     */
    train(m: number, epochs: number, eta: number, seed: number): Uint32Array;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_playground_free: (a: number, b: number) => void;
    readonly playground_assignment: (a: number, b: number, c: number) => [number, number, number, number];
    readonly playground_bin_map: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
    readonly playground_curves: (a: number, b: number) => [number, number, number, number];
    readonly playground_histogram: (a: number, b: number, c: number) => [number, number, number, number];
    readonly playground_is_empty: (a: number) => number;
    readonly playground_labels: (a: number) => [number, number];
    readonly playground_len: (a: number) => number;
    readonly playground_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly playground_points: (a: number) => [number, number];
    readonly playground_probe: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly playground_train: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
