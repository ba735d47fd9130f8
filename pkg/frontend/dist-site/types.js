/** Payload shapes exchanged with the calibration service. */
export {};
