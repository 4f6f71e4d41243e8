// Application wiring: profile form submission, evaluation runs (persisted
// or what-if dry runs), results rendering, inline errors, and the
// stale-results banner.  View state is last-write-wins; the newest
// completed evaluation run owns the results pane.

import { ACTION_ORDER, ACTION_TITLES } from "./actions.js";
import { ApiClient, ApiRequestError } from "./api.js";
import {
  buildProfileForm,
  clearFieldErrors,
  readProfileForm,
  setFieldError,
  setFieldErrors,
} from "./form.js";
import {
  buildViewModel,
  renderBandChart,
  renderRecommendationTable,
  renderSummary,
  renderTimelineChart,
} from "./results.js";
import type { ResultsViewModel } from "./results.js";
import type { FetchLike } from "./api.js";
import type { RecommendationRow, Snapshot } from "./types.js";

export interface AppOptions {
  baseUrl: string;
  fetchImpl?: FetchLike;
}

export interface App {
  api: ApiClient;
  submitProfile(): Promise<number | null>;
  runEvaluation(whatIf?: boolean): Promise<ResultsViewModel | null>;
  lastResults(): ResultsViewModel | null;
}

function byId<T extends HTMLElement>(doc: Document, id: string): T {
  const element = doc.getElementById(id);
  if (!element) {
    throw new Error(`missing element #${id}`);
  }
  return element as T;
}

export function initApp(doc: Document, options: AppOptions): App {
  const api = new ApiClient(options.baseUrl, options.fetchImpl);
  buildProfileForm(doc, byId(doc, "profile-form"));

  const status = byId(doc, "status");
  const staleBanner = byId(doc, "stale-banner");
  let results: ResultsViewModel | null = null;
  let renderedForVersion: number | null = null;
  let profileVersion: number | null = null;
  let runCounter = 0;

  const say = (text: string) => {
    status.textContent = text;
  };

  const refreshStale = () => {
    const stale =
      results !== null && renderedForVersion !== null && profileVersion !== null
        ? profileVersion > renderedForVersion
        : false;
    staleBanner.hidden = !stale;
    staleBanner.textContent = stale
      ? "Profile changed since this evaluation; results may be stale."
      : "";
  };

  async function submitProfile(): Promise<number | null> {
    const { profile, errors } = readProfileForm(doc);
    setFieldErrors(doc, errors);
    if (errors.length > 0) {
      say("profile not submitted: fix the highlighted fields");
      return null;
    }
    try {
      const { version } = await api.putProfile(profile);
      profileVersion = version;
      say(`profile stored (version ${version})`);
      refreshStale();
      return version;
    } catch (error) {
      if (error instanceof ApiRequestError && error.field) {
        setFieldError(doc, error.field, error.message);
        say("profile rejected by the server");
      } else {
        say(`profile submission failed: ${(error as Error).message}`);
      }
      return null;
    }
  }

  async function runEvaluation(whatIf = false): Promise<ResultsViewModel | null> {
    const from = byId<HTMLInputElement>(doc, "range-from").value;
    const to = byId<HTMLInputElement>(doc, "range-to").value;
    if (!from || !to) {
      say("set the evaluation range first");
      return null;
    }
    const run = ++runCounter;
    say(whatIf ? "previewing what-if scenario..." : "evaluating...");
    try {
      let snapshot: Snapshot;
      if (whatIf) {
        const { profile, errors } = readProfileForm(doc);
        setFieldErrors(doc, errors);
        if (errors.length > 0) {
          say("what-if not run: fix the highlighted fields");
          return null;
        }
        snapshot = await api.evaluate({
          from,
          to,
          dry_run: true,
          overrides: { profile },
        });
      } else {
        snapshot = await api.evaluate({ from, to });
      }
      const model = await renderFromServer(snapshot, whatIf);
      if (run === runCounter) {
        say(whatIf ? "what-if preview rendered (not persisted)" : "evaluation complete");
      }
      return model;
    } catch (error) {
      if (run === runCounter) {
        if (error instanceof ApiRequestError && error.missing) {
          say(`evaluation impossible: missing ${error.missing.join(", ")}`);
        } else {
          say(`evaluation failed: ${(error as Error).message}`);
        }
      }
      return null;
    }
  }

  async function renderFromServer(snapshot: Snapshot, whatIf: boolean): Promise<ResultsViewModel> {
    // what-if snapshots are not persisted, so their payload is the only
    // source; persisted runs re-read the documented read endpoints
    let model: ResultsViewModel;
    if (whatIf) {
      model = buildViewModel(
        {
          generated_at: snapshot.generated_at,
          input: snapshot.decision_input,
          actions: snapshot.actions,
          risk: { mean: snapshot.risk.mean, max: snapshot.risk.max, iso9223: snapshot.iso9223 },
          explanations: snapshot.explanations,
          coercions: snapshot.coercions,
          rows: rowsFromSnapshot(snapshot),
          tree_fingerprint: snapshot.tree_fingerprint,
        },
        snapshot.risk.timeline,
        snapshot.pollution.band_daily,
      );
    } else {
      const [recommendation, timeline] = await Promise.all([
        api.recommendations(),
        api.timeline(),
      ]);
      model = buildViewModel(recommendation, timeline.points, snapshot.pollution.band_daily);
    }
    results = model;
    renderedForVersion = profileVersion;
    renderSummary(doc, byId(doc, "results-summary"), model);
    renderRecommendationTable(doc, byId(doc, "recommendation"), model.rows);
    renderTimelineChart(doc, byId(doc, "timeline-chart"), model.timeline);
    const bandContainer = byId(doc, "band-chart");
    const species = Object.keys(model.band).sort();
    bandContainer.textContent = "";
    for (const name of species) {
      const section = doc.createElement("div");
      section.dataset.species = name;
      bandContainer.append(section);
      renderBandChart(doc, section, name, model.band[name]);
    }
    byId(doc, "results").hidden = false;
    const marker = byId(doc, "what-if-marker");
    marker.hidden = !whatIf;
    refreshStale();
    return model;
  }

  byId(doc, "submit-profile").addEventListener("click", () => {
    void submitProfile();
  });
  byId(doc, "run-evaluation").addEventListener("click", () => {
    void runEvaluation(false);
  });
  byId(doc, "run-what-if").addEventListener("click", () => {
    void runEvaluation(true);
  });
  clearFieldErrors(doc);

  return {
    api,
    submitProfile,
    runEvaluation,
    lastResults: () => results,
  };
}

// Table rows for a dry-run snapshot, mirroring the server's ordering rule:
// the action vocabulary order is fixed and yes-actions are highlighted.
function rowsFromSnapshot(snapshot: Snapshot): RecommendationRow[] {
  return ACTION_ORDER.map((action) => ({
    action,
    title: ACTION_TITLES[action],
    output: snapshot.actions[action],
    highlight: snapshot.actions[action] !== "no_action",
    explanations: snapshot.explanations[action] ?? [],
  }));
}
