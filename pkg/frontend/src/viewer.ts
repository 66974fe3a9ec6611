/**
 * Interaction state: maps pointer positions on the hemisphere widget to a
 * light direction inside the unit disc, and coalesces render requests so at
 * most one is in flight. While a drag is active the render scale drops for
 * responsiveness; releasing always schedules one full-resolution render.
 */

export interface LightUV {
  lu: number;
  lv: number;
}

export interface RenderRequest {
  lu: number;
  lv: number;
  renderScale: number;
}

export type RenderScale = 1 | 0.5 | 0.25;

export interface ViewerState {
  currentLight: LightUV;
  dragging: boolean;
  interactiveScale: RenderScale;
  /** request currently being rendered, if any */
  inFlight: RenderRequest | null;
  /** most recent request that superseded the in-flight one */
  pending: RenderRequest | null;
}

export function initialState(interactiveScale: RenderScale = 0.5): ViewerState {
  return {
    currentLight: { lu: 0, lv: 0 },
    dragging: false,
    interactiveScale,
    inFlight: null,
    pending: null,
  };
}

/**
 * Widget position -> light uv. The widget is a circle of radius `radius`
 * centered at (cx, cy); points outside the rim clamp to the rim direction.
 */
export function pointerToLight(
  x: number,
  y: number,
  cx: number,
  cy: number,
  radius: number,
): LightUV {
  let lu = (x - cx) / radius;
  let lv = (y - cy) / radius;
  const r = Math.hypot(lu, lv);
  if (r > 1) {
    lu /= r;
    lv /= r;
  }
  return { lu, lv };
}

function request(state: ViewerState, scale: number): RenderRequest {
  return { lu: state.currentLight.lu, lv: state.currentLight.lv, renderScale: scale };
}

/** Queue a render, replacing any not-yet-started one. */
function schedule(state: ViewerState, req: RenderRequest): ViewerState {
  if (state.inFlight === null) {
    return { ...state, inFlight: req, pending: null };
  }
  return { ...state, pending: req };
}

export function onDragStart(state: ViewerState, light: LightUV): ViewerState {
  const next = { ...state, dragging: true, currentLight: light };
  return schedule(next, request(next, next.interactiveScale));
}

export function onDragMove(state: ViewerState, light: LightUV): ViewerState {
  if (!state.dragging) return state;
  const next = { ...state, currentLight: light };
  return schedule(next, request(next, next.interactiveScale));
}

export function onDragEnd(state: ViewerState): ViewerState {
  const next = { ...state, dragging: false };
  // contract: release always produces one full-resolution frame
  return schedule(next, request(next, 1));
}

export function onLightSet(state: ViewerState, light: LightUV): ViewerState {
  const next = { ...state, currentLight: light };
  return schedule(next, request(next, 1));
}

/** The renderer finished the in-flight frame; start the pending one if any. */
export function onRenderDone(state: ViewerState): ViewerState {
  if (state.pending !== null) {
    return { ...state, inFlight: state.pending, pending: null };
  }
  return { ...state, inFlight: null };
}
