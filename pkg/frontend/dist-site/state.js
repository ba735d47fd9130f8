/** Annotation tool state: pure reducer over (state, event).
 *
 * The UI never computes camera geometry itself; solutions and overlay
 * polylines always arrive from the service.  Responses carry the sequence
 * number of the request that produced them and are discarded when a newer
 * request has been issued since.
 */
export const PAN_LIMIT_DEG = 89.9;
export const TILT_LIMIT_DEG = 89.9;
export const MIN_FOCAL_PX = 1.0;
export const initialState = {
    sessionId: null,
    base: null,
    field: null,
    imageSize: [1280, 720],
    pendingKeyPoint: null,
    pairs: [],
    replaceCandidate: null,
    solution: null,
    overlay: [],
    manual: null,
    requestSeq: 0,
    inFlight: false,
    notice: null,
    error: null,
};
function clampNudge(param, value) {
    if (!Number.isFinite(value)) {
        return [param === "focal_px" ? MIN_FOCAL_PX : 0, true];
    }
    if (param === "pan_deg") {
        const v = Math.min(Math.max(value, -PAN_LIMIT_DEG), PAN_LIMIT_DEG);
        return [v, v !== value];
    }
    if (param === "tilt_deg") {
        const v = Math.min(Math.max(value, -TILT_LIMIT_DEG), TILT_LIMIT_DEG);
        return [v, v !== value];
    }
    const v = Math.max(value, MIN_FOCAL_PX);
    return [v, v !== value];
}
function stale(state, seq) {
    return seq !== state.requestSeq;
}
export function reduce(state, event) {
    switch (event.type) {
        case "session-ready":
            return {
                ...initialState,
                sessionId: event.sessionId,
                base: event.base,
                field: event.field,
                imageSize: event.imageSize,
            };
        case "key-point-selected":
            return { ...state, pendingKeyPoint: event.name, notice: null };
        case "image-clicked": {
            if (state.pendingKeyPoint === null) {
                return { ...state, notice: "Select a field key point first." };
            }
            const pair = {
                keyPoint: state.pendingKeyPoint,
                pixel: event.pixel,
            };
            if (state.pairs.length >= 2) {
                return {
                    ...state,
                    replaceCandidate: pair,
                    notice: "Two pairs already picked - confirm to replace the oldest.",
                };
            }
            return {
                ...state,
                pairs: [...state.pairs, pair],
                pendingKeyPoint: null,
                notice: null,
            };
        }
        case "replace-confirmed": {
            if (state.replaceCandidate === null)
                return state;
            return {
                ...state,
                pairs: [...state.pairs.slice(1), state.replaceCandidate],
                replaceCandidate: null,
                pendingKeyPoint: null,
                notice: null,
            };
        }
        case "replace-cancelled":
            return { ...state, replaceCandidate: null, notice: null };
        case "undo":
            if (state.replaceCandidate !== null) {
                return { ...state, replaceCandidate: null, notice: null };
            }
            return { ...state, pairs: state.pairs.slice(0, -1), notice: null };
        case "calibrate-requested":
        case "overlay-requested":
            return { ...state, requestSeq: event.seq, inFlight: true, error: null };
        case "calibrate-succeeded": {
            if (stale(state, event.seq))
                return state;
            return {
                ...state,
                inFlight: false,
                solution: event.solution,
                overlay: event.overlay,
                manual: null,
                error: null,
            };
        }
        case "calibrate-failed": {
            if (stale(state, event.seq))
                return state;
            // non-destructive: annotation and previous solution stay intact
            return { ...state, inFlight: false, error: event.message };
        }
        case "overlay-loaded": {
            if (stale(state, event.seq))
                return state;
            return {
                ...state,
                inFlight: false,
                overlay: event.overlay,
                manual: event.ptz,
            };
        }
        case "overlay-failed": {
            if (stale(state, event.seq))
                return state;
            return { ...state, inFlight: false, error: event.message };
        }
        case "nudge-changed": {
            const seed = state.manual ??
                (state.solution !== null
                    ? {
                        pan_deg: state.solution.pan_deg,
                        tilt_deg: state.solution.tilt_deg,
                        focal_px: state.solution.focal_px,
                    }
                    : { pan_deg: 0, tilt_deg: 0, focal_px: 2000 });
            const [value, clamped] = clampNudge(event.param, event.value);
            return {
                ...state,
                manual: { ...seed, [event.param]: value },
                notice: clamped ? `Value clamped to the valid range (${value}).` : state.notice,
            };
        }
        case "notice-dismissed":
            return { ...state, notice: null };
        case "error-dismissed":
            return { ...state, error: null };
    }
}
/** The calibrate call is enabled iff exactly two complete pairs exist. */
export function canCalibrate(state) {
    return state.sessionId !== null && state.pairs.length === 2 && !state.inFlight;
}
/** Current nudge values (falling back to the accepted solution). */
export function currentPtz(state) {
    if (state.manual !== null)
        return state.manual;
    if (state.solution !== null) {
        return {
            pan_deg: state.solution.pan_deg,
            tilt_deg: state.solution.tilt_deg,
            focal_px: state.solution.focal_px,
        };
    }
    return null;
}
/** Camera-file record for export; every number came from the service. */
export function exportRecord(state) {
    const ptz = currentPtz(state);
    if (state.base === null || ptz === null)
        return null;
    return { base: state.base, ptz };
}
