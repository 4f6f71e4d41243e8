// Profile form: one control per hangar fact (toggles for flags, selects
// for materials, numeric inputs with units for areas and volume).  The
// same field list drives building, reading, and filling, so a profile
// survives a form round trip unchanged.

import {
  AREA_FIELDS,
  FLAG_FIELDS,
  MATERIAL_FIELDS,
  MATERIALS,
} from "./types.js";
import type { HangarProfile } from "./types.js";
import { validateProfile } from "./validate.js";
import type { FieldError } from "./validate.js";

const FIELD_LABELS: Record<string, string> = {
  near_sea: "Location near sea",
  ac_installed: "AC installed",
  heating_installed: "Heating installed",
  filters_installed: "Filters installed",
  insulation_installed: "Insulation installed",
  barriers_installed: "Barriers installed",
  carpets_installed: "Carpets installed",
  walls_material: "Walls material",
  roof_material: "Roof material",
  floor_material: "Floor material",
  walls_area: "Walls area [m2]",
  roof_area: "Roof area [m2]",
  floor_area: "Floor area [m2]",
  exhibition_area: "Exhibition area [m2]",
  volume: "Hangar volume [m3]",
};

export function controlId(field: string): string {
  return `field-${field}`;
}

function errorId(field: string): string {
  return `error-${field}`;
}

export function buildProfileForm(doc: Document, container: Element): void {
  container.textContent = "";
  for (const field of FLAG_FIELDS) {
    const row = doc.createElement("label");
    row.className = "form-row";
    const input = doc.createElement("input");
    input.type = "checkbox";
    input.id = controlId(field);
    row.append(input, ` ${FIELD_LABELS[field]}`);
    container.append(row, errorSpan(doc, field));
  }
  for (const field of MATERIAL_FIELDS) {
    const row = doc.createElement("label");
    row.className = "form-row";
    row.append(`${FIELD_LABELS[field]} `);
    const select = doc.createElement("select");
    select.id = controlId(field);
    for (const material of MATERIALS) {
      const option = doc.createElement("option");
      option.value = material;
      option.textContent = material;
      select.append(option);
    }
    row.append(select);
    container.append(row, errorSpan(doc, field));
  }
  for (const field of AREA_FIELDS) {
    const row = doc.createElement("label");
    row.className = "form-row";
    row.append(`${FIELD_LABELS[field]} `);
    const input = doc.createElement("input");
    input.type = "number";
    input.step = "any";
    input.min = "0";
    input.id = controlId(field);
    row.append(input);
    container.append(row, errorSpan(doc, field));
  }
}

function errorSpan(doc: Document, field: string): Element {
  const span = doc.createElement("span");
  span.className = "field-error";
  span.id = errorId(field);
  return span;
}

function control<T extends HTMLElement>(doc: Document, field: string): T {
  const element = doc.getElementById(controlId(field));
  if (!element) {
    throw new Error(`missing form control for ${field}`);
  }
  return element as T;
}

export function fillProfileForm(doc: Document, profile: HangarProfile): void {
  for (const field of FLAG_FIELDS) {
    control<HTMLInputElement>(doc, field).checked = profile[field];
  }
  for (const field of MATERIAL_FIELDS) {
    control<HTMLSelectElement>(doc, field).value = profile[field];
  }
  for (const field of AREA_FIELDS) {
    control<HTMLInputElement>(doc, field).value = String(profile[field]);
  }
}

export function readProfileForm(doc: Document): { profile: HangarProfile; errors: FieldError[] } {
  const profile = {} as Record<string, unknown>;
  for (const field of FLAG_FIELDS) {
    profile[field] = control<HTMLInputElement>(doc, field).checked;
  }
  for (const field of MATERIAL_FIELDS) {
    profile[field] = control<HTMLSelectElement>(doc, field).value;
  }
  for (const field of AREA_FIELDS) {
    profile[field] = Number(control<HTMLInputElement>(doc, field).value);
  }
  const typed = profile as unknown as HangarProfile;
  return { profile: typed, errors: validateProfile(typed) };
}

export function clearFieldErrors(doc: Document): void {
  for (const field of [...FLAG_FIELDS, ...MATERIAL_FIELDS, ...AREA_FIELDS]) {
    const span = doc.getElementById(errorId(field));
    if (span) span.textContent = "";
  }
}

export function setFieldError(doc: Document, field: string, message: string): void {
  const span = doc.getElementById(errorId(field));
  if (span) span.textContent = message;
}

export function setFieldErrors(doc: Document, errors: FieldError[]): void {
  clearFieldErrors(doc);
  for (const error of errors) {
    setFieldError(doc, error.field, error.message);
  }
}
