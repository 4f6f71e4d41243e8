// Client-side validation mirroring the server's profile invariants, so a
// bad form never leaves the browser; server 422s still map back to fields.

import { AREA_FIELDS, FLAG_FIELDS, MATERIAL_FIELDS, MATERIALS } from "./types.js";
import type { HangarProfile } from "./types.js";

export interface FieldError {
  field: string;
  message: string;
}

export function validateProfile(profile: HangarProfile): FieldError[] {
  const errors: FieldError[] = [];
  for (const field of FLAG_FIELDS) {
    if (typeof profile[field] !== "boolean") {
      errors.push({ field, message: "must be yes or no" });
    }
  }
  for (const field of MATERIAL_FIELDS) {
    if (!MATERIALS.includes(profile[field])) {
      errors.push({ field, message: `must be one of ${MATERIALS.join(", ")}` });
    }
  }
  for (const field of AREA_FIELDS) {
    const value = profile[field];
    if (!Number.isFinite(value) || value <= 0) {
      errors.push({ field, message: "must be a positive number" });
    }
  }
  if (
    Number.isFinite(profile.exhibition_area) &&
    Number.isFinite(profile.floor_area) &&
    profile.exhibition_area > profile.floor_area
  ) {
    errors.push({
      field: "exhibition_area",
      message: "exhibition area cannot exceed floor area",
    });
  }
  return errors;
}
