/* tslint:disable */
/* eslint-disable */

export class Curve {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly summary: string;
    readonly x: Float64Array;
    readonly y2: Float64Array;
    readonly y: Float64Array;
}

export function cooling(gamma_m_hz: number, p0_dbm: number, n_th: number, n_tilde_at_p0: number, p_min_dbm: number, p_max_dbm: number, points: number): Curve;

export function pull(bare_ghz: number, parasitic_ff: number, pad_side_um: number, single_plate: boolean, d_min_nm: number, d_max_nm: number, target_ghz: number, points: number): Curve;

export function spectrum(kappa_hz: number, kappa_ex_hz: number, omega_m_hz: number, gamma_m_hz: number, g_hz: number, detuning_offset_hz: number, n_th: number, n_tilde: number, points: number): Curve;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_curve_free: (a: number, b: number) => void;
    readonly cooling: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly curve_summary: (a: number) => [number, number];
    readonly curve_x: (a: number) => [number, number];
    readonly curve_y: (a: number) => [number, number];
    readonly curve_y2: (a: number) => [number, number];
    readonly pull: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
    readonly spectrum: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
