/** Typed fetch wrappers for the calibration service. */
export class ApiError extends Error {
    constructor(body, status) {
        super(`${body.message} (${body.code}, HTTP ${status})`);
        this.code = body.code;
        this.detail = body.detail;
    }
}
async function request(path, init) {
    const response = await fetch(path, {
        headers: { "Content-Type": "application/json" },
        ...init,
    });
    if (!response.ok) {
        let body;
        try {
            body = (await response.json());
        }
        catch {
            body = { code: "http_error", message: response.statusText };
        }
        throw new ApiError(body, response.status);
    }
    return (await response.json());
}
export function createSession(base, image) {
    return request("/sessions", {
        method: "POST",
        body: JSON.stringify({ base, image }),
    });
}
export function fetchField(sessionId) {
    return request(`/sessions/${sessionId}/field`);
}
export function calibrate(sessionId, pairs) {
    return request(`/sessions/${sessionId}/calibrate`, {
        method: "POST",
        body: JSON.stringify({
            points: pairs.map((p) => ({ key_point: p.keyPoint, pixel: p.pixel })),
        }),
    });
}
export function manualOverlay(sessionId, ptz) {
    const params = new URLSearchParams({
        pan: String(ptz.pan_deg),
        tilt: String(ptz.tilt_deg),
        focal: String(ptz.focal_px),
    });
    return request(`/sessions/${sessionId}/overlay?${params}`);
}
