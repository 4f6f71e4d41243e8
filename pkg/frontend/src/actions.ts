// Fixed action vocabulary and presentation order, matching the service's
// recommendation rows: operational actions first, then refurbishment.

export const ACTION_ORDER = [
  "air_exchange",
  "heating_op",
  "ac_op",
  "occupancy_op",
  "exhibition_ratio_op",
  "install_filters",
  "install_ac",
  "install_heating",
  "install_insulation",
  "install_barriers",
  "uninstall_carpets",
] as const;

export type ActionName = (typeof ACTION_ORDER)[number];

export const ACTION_TITLES: Record<string, string> = {
  air_exchange: "Increase or decrease air exchange rate",
  heating_op: "Start or stop heating",
  ac_op: "Start or stop AC",
  occupancy_op: "Increase or decrease number of people in the hangar",
  exhibition_ratio_op: "Change the ratio between exhibition area and hangar volume",
  install_filters: "Install filters (HEPA, carbon etc.)",
  install_ac: "Install AC",
  install_heating: "Install heating",
  install_insulation: "Install insulation",
  install_barriers: "Install barriers",
  uninstall_carpets: "Uninstall carpets",
};
