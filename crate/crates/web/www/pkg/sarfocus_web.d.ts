/* tslint:disable */
/* eslint-disable */

/**
 * One simulated collection with its images.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Total estimated azimuth phase error, radians, one value per k_x bin.
     */
    ape(): Float64Array;
    /**
     * Runs the 2-D autofocus and the azimuth-only baseline.
     */
    autofocus(): void;
    azimuth_only(): Pixmap | undefined;
    defocused(): Pixmap;
    /**
     * Accumulated 2-D phase error field, scaled to [0, 1].
     */
    field(): Pixmap | undefined;
    /**
     * Contrast and entropy pairs: defocused, azimuth-only, then one pair
     * per history entry of the 2-D run.
     */
    metrics(): Float64Array;
    /**
     * Simulates echoes along a path wobbling by `amplitude_m` and forms
     * the image with the nominal path.
     */
    constructor(amplitude_m: number, cycles: number, along_range: boolean);
    refocused(): Pixmap | undefined;
    /**
     * Spectrum magnitude: 0 raw, 1 after ambiguity elimination,
     * 2 after elimination and alignment.
     */
    spectrum(stage: number): Pixmap;
}

/**
 * Grayscale pixmap in row-major order, top row first.
 */
export class Pixmap {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * RGBA bytes ready for `ImageData`.
     */
    rgba(): Uint8Array;
    readonly height: number;
    readonly width: number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly __wbg_pixmap_free: (a: number, b: number) => void;
    readonly demo_ape: (a: number) => [number, number];
    readonly demo_autofocus: (a: number) => [number, number];
    readonly demo_azimuth_only: (a: number) => number;
    readonly demo_defocused: (a: number) => number;
    readonly demo_field: (a: number) => number;
    readonly demo_metrics: (a: number) => [number, number];
    readonly demo_new: (a: number, b: number, c: number) => [number, number, number];
    readonly demo_refocused: (a: number) => number;
    readonly demo_spectrum: (a: number, b: number) => [number, number, number];
    readonly pixmap_height: (a: number) => number;
    readonly pixmap_rgba: (a: number) => [number, number];
    readonly pixmap_width: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
