"""Multi-output decision core.

Expert rules label a sampled grid of situations to form a training corpus;
a single CART tree with one label per action is grown on it and answers
queries with an 11-component action vector.  Growth uses the mean Gini
impurity across all outputs, midpoint thresholds for numeric features, and
one-vs-rest splits for categorical ones, with deterministic tie-breaking so
identical corpora always yield bit-identical trees.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import random
from dataclasses import dataclass, fields, replace
from importlib import resources

from .store import MATERIALS

NO_ACTION = "no_action"

# Action vocabulary in fixed presentation order: operational, then
# refurbishment.  Order matters for golden tables and label tuples.
ACTION_NAMES = (
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
)

ACTION_TITLES = {
    "air_exchange": "Increase or decrease air exchange rate",
    "heating_op": "Start or stop heating",
    "ac_op": "Start or stop AC",
    "occupancy_op": "Increase or decrease number of people in the hangar",
    "exhibition_ratio_op": "Change the ratio between exhibition area and hangar volume",
    "install_filters": "Install filters (HEPA, carbon etc.)",
    "install_ac": "Install AC",
    "install_heating": "Install heating",
    "install_insulation": "Install insulation",
    "install_barriers": "Install barriers",
    "uninstall_carpets": "Uninstall carpets",
}

ACTION_DOMAINS = {
    "air_exchange": ("increase", "decrease", NO_ACTION),
    "heating_op": ("start", "stop", NO_ACTION),
    "ac_op": ("start", "stop", NO_ACTION),
    "occupancy_op": ("increase", "decrease", NO_ACTION),
    "exhibition_ratio_op": ("change", NO_ACTION),
    "install_filters": ("yes", NO_ACTION),
    "install_ac": ("yes", NO_ACTION),
    "install_heating": ("yes", NO_ACTION),
    "install_insulation": ("yes", NO_ACTION),
    "install_barriers": ("yes", NO_ACTION),
    "uninstall_carpets": ("yes", NO_ACTION),
}


class DecisionError(Exception):
    pass


class UnsatisfiableRule(DecisionError):
    """A rule never fires on the sampling grid."""


class ConflictAtEqualPriority(DecisionError):
    """Two equal-priority rules assign different values to one output."""


class EmptyCorpus(DecisionError):
    pass


class InconsistentLabels(DecisionError):
    """The same input carries different labels in the corpus."""


class UntrainedModel(DecisionError):
    pass


class BadTreeFile(DecisionError):
    pass


class BadRulesFile(DecisionError):
    pass


@dataclass(frozen=True)
class DecisionInput:
    """Flattened feature vector the tree decides on: hangar profile facts
    plus the evaluated period's derived features."""

    near_sea: bool
    ac_installed: bool
    heating_installed: bool
    filters_installed: bool
    insulation_installed: bool
    barriers_installed: bool
    carpets_installed: bool
    walls_material: str
    roof_material: str
    floor_material: str
    walls_area: float
    roof_area: float
    floor_area: float
    exhibition_area: float
    volume: float
    time_of_wetness: float  # h/yr
    iso_category: int  # 1..5
    mean_risk: float
    max_risk: float
    freeze_thaw_events: float  # events/yr
    indoor_so2_annual: float  # ug/m3
    indoor_pm10_annual: float
    indoor_pm25_annual: float
    rh_indoor_minus_outdoor: float = 0.0  # mean indoor RH - mean outdoor RH, %
    occupancy: object = None  # persons; None = not tracked

    @property
    def area_volume_ratio(self):
        return self.exhibition_area / self.volume

    _BOOL_FIELDS = (
        "near_sea", "ac_installed", "heating_installed", "filters_installed",
        "insulation_installed", "barriers_installed", "carpets_installed",
    )
    _NONNEG_FIELDS = (
        "walls_area", "roof_area", "floor_area", "exhibition_area", "volume",
        "time_of_wetness", "mean_risk", "max_risk", "freeze_thaw_events",
        "indoor_so2_annual", "indoor_pm10_annual", "indoor_pm25_annual",
    )

    def validate(self):
        for name in self._BOOL_FIELDS:
            if not isinstance(getattr(self, name), bool):
                raise DecisionError(f"{name} must be a boolean")
        for name in ("walls_material", "roof_material", "floor_material"):
            if getattr(self, name) not in MATERIALS:
                raise DecisionError(f"{name} must be one of {MATERIALS}")
        for name in self._NONNEG_FIELDS:
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise DecisionError(f"{name} must be finite and >= 0")
        if not math.isfinite(self.rh_indoor_minus_outdoor):
            raise DecisionError("rh_indoor_minus_outdoor must be finite")
        if self.iso_category not in (1, 2, 3, 4, 5):
            raise DecisionError("iso_category must be 1..5")
        if self.occupancy is not None and (not math.isfinite(self.occupancy) or self.occupancy < 0):
            raise DecisionError("occupancy must be finite and >= 0 when present")

    @classmethod
    def from_profile(cls, profile, **features):
        return cls(
            near_sea=profile.near_sea,
            ac_installed=profile.ac_installed,
            heating_installed=profile.heating_installed,
            filters_installed=profile.filters_installed,
            insulation_installed=profile.insulation_installed,
            barriers_installed=profile.barriers_installed,
            carpets_installed=profile.carpets_installed,
            walls_material=profile.walls_material,
            roof_material=profile.roof_material,
            floor_material=profile.floor_material,
            walls_area=profile.walls_area,
            roof_area=profile.roof_area,
            floor_area=profile.floor_area,
            exhibition_area=profile.exhibition_area,
            volume=profile.volume,
            **features,
        )

    def to_dict(self):
        doc = {f.name: getattr(self, f.name) for f in fields(self)}
        doc["area_volume_ratio"] = self.area_volume_ratio
        return doc

    @classmethod
    def from_dict(cls, doc):
        known = {f.name for f in fields(cls)}
        payload = {k: v for k, v in doc.items() if k != "area_volume_ratio"}
        unknown = sorted(set(payload) - known)
        if unknown:
            raise DecisionError(f"unknown decision-input field {unknown[0]!r}")
        inp = cls(**payload)
        inp.validate()
        return inp


# feature name -> kind; order fixes feature indices inside the tree
FEATURES = (
    ("near_sea", "num"),
    ("ac_installed", "num"),
    ("heating_installed", "num"),
    ("filters_installed", "num"),
    ("insulation_installed", "num"),
    ("barriers_installed", "num"),
    ("carpets_installed", "num"),
    ("walls_material", "cat"),
    ("roof_material", "cat"),
    ("floor_material", "cat"),
    ("walls_area", "num"),
    ("roof_area", "num"),
    ("floor_area", "num"),
    ("exhibition_area", "num"),
    ("volume", "num"),
    ("time_of_wetness", "num"),
    ("iso_category", "num"),
    ("mean_risk", "num"),
    ("max_risk", "num"),
    ("freeze_thaw_events", "num"),
    ("indoor_so2_annual", "num"),
    ("indoor_pm10_annual", "num"),
    ("indoor_pm25_annual", "num"),
    ("rh_indoor_minus_outdoor", "num"),
    ("occupancy", "num"),
    ("area_volume_ratio", "num"),
)

FEATURE_NAMES = tuple(name for name, _ in FEATURES)
_FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}


def feature_vector(inp):
    """Encode a DecisionInput for the tree: bools as 0/1, materials as
    category strings, absent occupancy as -1."""
    out = []
    for name, kind in FEATURES:
        value = getattr(inp, name)
        if kind == "cat":
            out.append(value)
        elif isinstance(value, bool):
            out.append(1.0 if value else 0.0)
        elif value is None:
            out.append(-1.0)
        else:
            out.append(float(value))
    return tuple(out)


@dataclass(frozen=True)
class ActionVector:
    """One label per possible action; defaults to no action everywhere."""

    air_exchange: str = NO_ACTION
    heating_op: str = NO_ACTION
    ac_op: str = NO_ACTION
    occupancy_op: str = NO_ACTION
    exhibition_ratio_op: str = NO_ACTION
    install_filters: str = NO_ACTION
    install_ac: str = NO_ACTION
    install_heating: str = NO_ACTION
    install_insulation: str = NO_ACTION
    install_barriers: str = NO_ACTION
    uninstall_carpets: str = NO_ACTION

    def validate(self):
        for name in ACTION_NAMES:
            if getattr(self, name) not in ACTION_DOMAINS[name]:
                raise DecisionError(f"{name}={getattr(self, name)!r} outside its domain")

    def as_tuple(self):
        return tuple(getattr(self, name) for name in ACTION_NAMES)

    def to_dict(self):
        return {name: getattr(self, name) for name in ACTION_NAMES}

    @classmethod
    def from_tuple(cls, labels):
        return cls(**dict(zip(ACTION_NAMES, labels)))

    @classmethod
    def from_dict(cls, doc):
        unknown = sorted(set(doc) - set(ACTION_NAMES))
        if unknown:
            raise DecisionError(f"unknown action {unknown[0]!r}")
        vec = cls(**doc)
        vec.validate()
        return vec

    def violations(self, inp):
        """Consistency breaches against the actual equipment flags."""
        found = []
        if self.heating_op == "start" and not inp.heating_installed:
            found.append("heating_op=start requires heating_installed")
        if self.ac_op == "start" and not inp.ac_installed:
            found.append("ac_op=start requires ac_installed")
        installs = (
            ("install_filters", inp.filters_installed),
            ("install_ac", inp.ac_installed),
            ("install_heating", inp.heating_installed),
            ("install_insulation", inp.insulation_installed),
            ("install_barriers", inp.barriers_installed),
        )
        for name, already in installs:
            if getattr(self, name) == "yes" and already:
                found.append(f"{name}=yes requires it not to be installed")
        if self.uninstall_carpets == "yes" and not inp.carpets_installed:
            found.append("uninstall_carpets=yes requires carpets_installed")
        return found


def repair_actions(actions, inp):
    """Coerce invariant-violating outputs to no_action; report each coercion."""
    coercions = []
    fixed = actions
    for violation in actions.violations(inp):
        name = violation.split("=", 1)[0]
        coercions.append(f"{violation}; coerced to {NO_ACTION}")
        fixed = replace(fixed, **{name: NO_ACTION})
    return fixed, coercions


# -- expert rules -----------------------------------------------------------

_ATOM_OPS = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


@dataclass(frozen=True)
class Atom:
    feature: str
    op: str
    value: object

    def __post_init__(self):
        if self.feature not in _FEATURE_INDEX:
            raise BadRulesFile(f"unknown feature {self.feature!r} in rule atom")
        if self.op not in _ATOM_OPS:
            raise BadRulesFile(f"unknown operator {self.op!r} in rule atom")

    def holds(self, inp):
        return _ATOM_OPS[self.op](getattr(inp, self.feature), self.value)


@dataclass(frozen=True)
class ExpertRule:
    """Conjunctive predicate over decision inputs with a partial action
    assignment; ``priority`` resolves conflicts (higher wins)."""

    name: str
    atoms: tuple
    consequent: dict
    priority: int
    citation: str

    def __post_init__(self):
        for action, value in self.consequent.items():
            if action not in ACTION_DOMAINS:
                raise BadRulesFile(f"rule {self.name!r} assigns unknown action {action!r}")
            if value not in ACTION_DOMAINS[action]:
                raise BadRulesFile(
                    f"rule {self.name!r} assigns {action}={value!r} outside its domain"
                )

    def fires(self, inp):
        return all(atom.holds(inp) for atom in self.atoms)


def apply_rules(rules, inp):
    """Resolve all firing rules into a full action vector.

    Higher priority wins a contested output; equal priorities assigning
    different values to the same output are a hard error.  Unassigned
    outputs default to no action.
    """
    assigned = {}
    fired = []
    for rule in rules:
        if not rule.fires(inp):
            continue
        fired.append(rule.name)
        for action, value in rule.consequent.items():
            current = assigned.get(action)
            if current is None or rule.priority > current[1]:
                assigned[action] = (value, rule.priority, rule.name)
            elif rule.priority == current[1] and value != current[0]:
                raise ConflictAtEqualPriority(
                    f"rules {current[2]!r} and {rule.name!r} both at priority "
                    f"{rule.priority} assign {action}={current[0]!r} vs {value!r}"
                )
    labels = {action: value for action, (value, _, _) in assigned.items()}
    return ActionVector(**labels), fired


@dataclass
class CorpusBuild:
    corpus: list  # (DecisionInput, ActionVector)
    coverage: dict  # rule name -> number of sampled inputs where it fired


def build_training_corpus(rules, inputs):
    """Label every sampled input with the rules and deduplicate.

    Raises :class:`UnsatisfiableRule` when a rule never fires on the grid,
    so dead rules surface instead of silently shaping nothing.
    """
    coverage = {rule.name: 0 for rule in rules}
    corpus = []
    seen = {}
    for inp in inputs:
        inp.validate()
        labels, fired = apply_rules(rules, inp)
        bad = labels.violations(inp)
        if bad:
            raise DecisionError(
                f"rule consequent violates action invariants on the grid: {bad[0]}"
            )
        for name in fired:
            coverage[name] += 1
        key = feature_vector(inp)
        if key in seen:
            continue
        seen[key] = labels
        corpus.append((inp, labels))
    dead = sorted(name for name, hits in coverage.items() if hits == 0)
    if dead:
        raise UnsatisfiableRule(f"rules never fire on the grid: {', '.join(dead)}")
    return CorpusBuild(corpus=corpus, coverage=coverage)


# -- CART -------------------------------------------------------------------


@dataclass(frozen=True)
class TreeParams:
    max_depth: object = 12  # None = unconstrained
    min_samples_leaf: int = 2


@dataclass
class TreeNode:
    # split fields (internal nodes)
    feature: object = None  # feature index
    kind: str = ""  # "num" | "cat"
    threshold: object = None  # numeric threshold or category string
    left: object = None
    right: object = None
    # leaf fields
    labels: object = None  # tuple of one label per action
    counts: object = None  # per-action {label: count}

    @property
    def is_leaf(self):
        return self.labels is not None


@dataclass
class MultiOutputTree:
    root: TreeNode
    params: TreeParams
    fingerprint: str
    n_samples: int

    def node_count(self):
        def walk(node):
            if node.is_leaf:
                return 1
            return 1 + walk(node.left) + walk(node.right)

        return walk(self.root)


# labels are encoded as indices into each action's domain while training
_DOMAIN_SIZES = tuple(len(ACTION_DOMAINS[name]) for name in ACTION_NAMES)
_LABEL_CODES = tuple(
    {label: i for i, label in enumerate(ACTION_DOMAINS[name])} for name in ACTION_NAMES
)


def _encode_labels(labels):
    return tuple(_LABEL_CODES[out][label] for out, label in enumerate(labels))


def _decode_labels(codes):
    return tuple(ACTION_DOMAINS[name][code] for name, code in zip(ACTION_NAMES, codes))


def _label_counts(rows, indices):
    counts = [[0] * size for size in _DOMAIN_SIZES]
    for i in indices:
        codes = rows[i][1]
        for out, code in enumerate(codes):
            counts[out][code] += 1
    return counts


def _gini_from_counts(counts, total):
    acc = 0.0
    for per_output in counts:
        acc += 1.0 - sum(c * c for c in per_output) / (total * total)
    return acc / len(counts)


def _mean_gini(rows, indices):
    if not indices:
        return 0.0
    return _gini_from_counts(_label_counts(rows, indices), len(indices))


def _majority_labels(rows, indices):
    counts = _label_counts(rows, indices)
    codes = []
    counts_per_output = []
    for out, per_output in enumerate(counts):
        # deterministic: highest count, then lexicographically smallest label
        domain = ACTION_DOMAINS[ACTION_NAMES[out]]
        present = [(label, per_output[code]) for code, label in enumerate(domain) if per_output[code]]
        best = min(present, key=lambda item: (-item[1], item[0]))[0]
        codes.append(_LABEL_CODES[out][best])
        counts_per_output.append({label: n for label, n in sorted(present)})
    return tuple(codes), counts_per_output


def _candidate_splits(rows, indices, f_idx, kind):
    values = sorted({rows[i][0][f_idx] for i in indices})
    if len(values) < 2:
        return
    if kind == "num":
        for lo, hi in zip(values, values[1:]):
            yield (lo + hi) / 2.0
    else:
        # one-vs-rest; sorted category order fixes the tie-break
        for category in values:
            yield category


def _partition(rows, indices, f_idx, kind, threshold):
    left, right = [], []
    for i in indices:
        value = rows[i][0][f_idx]
        goes_left = value <= threshold if kind == "num" else value == threshold
        (left if goes_left else right).append(i)
    return left, right


def _grow(rows, indices, depth, params):
    impurity = _mean_gini(rows, indices)
    codes, counts = _majority_labels(rows, indices)
    max_depth = params.max_depth
    if (
        impurity <= 0.0
        or (max_depth is not None and depth >= max_depth)
        or len(indices) < 2 * params.min_samples_leaf
    ):
        return TreeNode(labels=_decode_labels(codes), counts=counts)

    n = len(indices)
    best = None  # (weighted_impurity, f_idx, kind, threshold, left, right)
    for f_idx, (name, kind) in enumerate(FEATURES):
        for threshold in _candidate_splits(rows, indices, f_idx, kind):
            left, right = _partition(rows, indices, f_idx, kind, threshold)
            if len(left) < params.min_samples_leaf or len(right) < params.min_samples_leaf:
                continue
            weighted = (
                len(left) * _mean_gini(rows, left) + len(right) * _mean_gini(rows, right)
            ) / n
            if best is None or weighted < best[0] - 1e-15:
                best = (weighted, f_idx, kind, threshold, left, right)
    # require a strict impurity decrease; a gainless split cannot help
    if best is None or best[0] >= impurity - 1e-12:
        return TreeNode(labels=_decode_labels(codes), counts=counts)
    _, f_idx, kind, threshold, left, right = best
    return TreeNode(
        feature=f_idx,
        kind=kind,
        threshold=threshold,
        left=_grow(rows, left, depth + 1, params),
        right=_grow(rows, right, depth + 1, params),
    )


def _corpus_fingerprint(rows, params):
    canon = {
        "params": {"max_depth": params.max_depth, "min_samples_leaf": params.min_samples_leaf},
        "rows": sorted(
            (list(map(str, fv)), list(_decode_labels(codes))) for fv, codes in rows
        ),
    }
    blob = json.dumps(canon, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def train_tree(corpus, params=None):
    """Grow a deterministic multi-output CART on a labeled corpus.

    With depth unconstrained, a consistent corpus is memorized exactly; the
    corpus hash becomes the tree fingerprint.
    """
    params = params or TreeParams()
    if not corpus:
        raise EmptyCorpus("training corpus is empty")
    rows = []
    seen = {}
    for inp, labels in corpus:
        fv = feature_vector(inp)
        lab = labels.as_tuple()
        if fv in seen:
            if seen[fv] != lab:
                raise InconsistentLabels(
                    f"identical inputs carry different labels: {seen[fv]} vs {lab}"
                )
            continue
        seen[fv] = lab
        rows.append((fv, _encode_labels(lab)))
    root = _grow(rows, list(range(len(rows))), 0, params)
    return MultiOutputTree(
        root=root,
        params=params,
        fingerprint=_corpus_fingerprint(rows, params),
        n_samples=len(rows),
    )


def _route(node, fv):
    while not node.is_leaf:
        value = fv[node.feature]
        if node.kind == "num":
            node = node.left if value <= node.threshold else node.right
        else:
            node = node.left if value == node.threshold else node.right
    return node


def predict_detailed(tree, inp):
    """Tree prediction plus the consistency repairs applied to it."""
    if tree is None or tree.root is None:
        raise UntrainedModel("no trained tree available")
    inp.validate()
    leaf = _route(tree.root, feature_vector(inp))
    raw = ActionVector.from_tuple(leaf.labels)
    return repair_actions(raw, inp)


def predict(tree, inp):
    """Route an input to its leaf and return the repaired action vector."""
    actions, _ = predict_detailed(tree, inp)
    return actions


def training_error(tree, corpus):
    """Fraction of corpus rows whose unrepaired prediction differs."""
    if not corpus:
        raise EmptyCorpus("training corpus is empty")
    wrong = 0
    for inp, labels in corpus:
        leaf = _route(tree.root, feature_vector(inp))
        if leaf.labels != labels.as_tuple():
            wrong += 1
    return wrong / len(corpus)


def retrain(corpus, new_examples, params=None):
    """Full retraining on the merged corpus; the old tree stays untouched.

    New examples are validated and must not contradict existing labels.
    """
    merged = list(corpus)
    for inp, labels in new_examples:
        inp.validate()
        labels.validate()
        merged.append((inp, labels))
    return train_tree(merged, params)


# -- tree file --------------------------------------------------------------

_TREE_FORMAT = "smarthangar-tree/1"


def _node_to_doc(node):
    if node.is_leaf:
        return {
            "kind": "leaf",
            "labels": dict(zip(ACTION_NAMES, node.labels)),
            "counts": dict(zip(ACTION_NAMES, node.counts)),
        }
    return {
        "kind": node.kind,
        "feature": FEATURE_NAMES[node.feature],
        "threshold": node.threshold,
        "left": _node_to_doc(node.left),
        "right": _node_to_doc(node.right),
    }


def _node_from_doc(doc):
    if not isinstance(doc, dict) or "kind" not in doc:
        raise BadTreeFile("malformed node record")
    if doc["kind"] == "leaf":
        try:
            labels = tuple(doc["labels"][name] for name in ACTION_NAMES)
            counts = [dict(doc["counts"][name]) for name in ACTION_NAMES]
        except (KeyError, TypeError) as exc:
            raise BadTreeFile(f"leaf record missing {exc}") from exc
        for name, label in zip(ACTION_NAMES, labels):
            if label not in ACTION_DOMAINS[name]:
                raise BadTreeFile(f"leaf label {name}={label!r} outside its domain")
        return TreeNode(labels=labels, counts=counts)
    if doc["kind"] not in ("num", "cat"):
        raise BadTreeFile(f"unknown node kind {doc['kind']!r}")
    try:
        feature = _FEATURE_INDEX[doc["feature"]]
        threshold = doc["threshold"]
        left = _node_from_doc(doc["left"])
        right = _node_from_doc(doc["right"])
    except KeyError as exc:
        raise BadTreeFile(f"split record missing or unknown {exc}") from exc
    if doc["kind"] == "num" and not (
        isinstance(threshold, (int, float)) and math.isfinite(threshold)
    ):
        raise BadTreeFile(f"non-finite threshold {threshold!r}")
    return TreeNode(feature=feature, kind=doc["kind"], threshold=threshold,
                    left=left, right=right)


def export_tree(tree):
    """Serialize a tree to its versioned text format (lossless)."""
    doc = {
        "format": _TREE_FORMAT,
        "params": {
            "max_depth": tree.params.max_depth,
            "min_samples_leaf": tree.params.min_samples_leaf,
        },
        "fingerprint": tree.fingerprint,
        "n_samples": tree.n_samples,
        "features": list(FEATURE_NAMES),
        "actions": list(ACTION_NAMES),
        "root": _node_to_doc(tree.root),
    }
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def import_tree(text):
    """Parse and validate a tree file; raises :class:`BadTreeFile` on damage."""
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise BadTreeFile(f"unparseable tree file: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != _TREE_FORMAT:
        raise BadTreeFile(f"unsupported tree format {doc.get('format') if isinstance(doc, dict) else None!r}")
    if doc.get("features") != list(FEATURE_NAMES) or doc.get("actions") != list(ACTION_NAMES):
        raise BadTreeFile("feature or action vocabulary mismatch")
    try:
        params = TreeParams(
            max_depth=doc["params"]["max_depth"],
            min_samples_leaf=int(doc["params"]["min_samples_leaf"]),
        )
        root = _node_from_doc(doc["root"])
        return MultiOutputTree(
            root=root,
            params=params,
            fingerprint=str(doc["fingerprint"]),
            n_samples=int(doc["n_samples"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise BadTreeFile(f"malformed tree file: {exc}") from exc


# -- rules file ---------------------------------------------------------------

_RULES_FORMAT = "smarthangar-rules/1"


def rules_from_doc(doc):
    if not isinstance(doc, dict) or doc.get("format") != _RULES_FORMAT:
        raise BadRulesFile("unsupported rules format")
    rules = []
    names = set()
    for record in doc.get("rules", ()):
        try:
            rule = ExpertRule(
                name=record["name"],
                atoms=tuple(Atom(*atom) for atom in record["when"]),
                consequent=dict(record["then"]),
                priority=int(record["priority"]),
                citation=record["citation"],
            )
        except (KeyError, TypeError) as exc:
            raise BadRulesFile(f"malformed rule record: {exc}") from exc
        if rule.name in names:
            raise BadRulesFile(f"duplicate rule name {rule.name!r}")
        names.add(rule.name)
        rules.append(rule)
    if not rules:
        raise BadRulesFile("rules file holds no rules")
    return tuple(rules)


def rules_to_doc(rules):
    return {
        "format": _RULES_FORMAT,
        "rules": [
            {
                "name": rule.name,
                "priority": rule.priority,
                "citation": rule.citation,
                "when": [[atom.feature, atom.op, atom.value] for atom in rule.atoms],
                "then": dict(rule.consequent),
            }
            for rule in rules
        ],
    }


def load_rules(path=None):
    """Load expert rules; the shipped default set when ``path`` is None."""
    if path is None:
        text = resources.files("smarthangar.data").joinpath("rules.json").read_text()
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise BadRulesFile(f"cannot read rules file: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BadRulesFile(f"unparseable rules file: {exc}") from exc
    return rules_from_doc(doc)


def save_rules(rules, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rules_to_doc(rules), fh, sort_keys=True, indent=1)
        fh.write("\n")


# -- shipped sampling plan -----------------------------------------------------

# expert thresholds used by the shipped rules (mirrored in data/rules.json)
FREEZE_THAW_PER_YEAR = 5.0
WETNESS_HOURS_PER_YEAR = 30.0
PM10_FILTER_THRESHOLD = 20.0
SO2_FILTER_THRESHOLD = 12.0
PEAK_RISK_THRESHOLD = 0.8

_BASE_SITUATION = dict(
    near_sea=False,
    ac_installed=False,
    heating_installed=False,
    filters_installed=False,
    insulation_installed=False,
    barriers_installed=False,
    carpets_installed=False,
    walls_material="wood",
    roof_material="steel",
    floor_material="concrete",
    walls_area=1004.8,
    roof_area=985.6,
    floor_area=985.6,
    exhibition_area=985.6,
    volume=7884.8,
    time_of_wetness=0.0,
    iso_category=1,
    mean_risk=0.05,
    max_risk=0.1,
    freeze_thaw_events=0.0,
    indoor_so2_annual=3.0,
    indoor_pm10_annual=6.0,
    indoor_pm25_annual=3.0,
    rh_indoor_minus_outdoor=2.0,
    occupancy=None,
)

# per-feature levels straddling every rule threshold
_GRID_LEVELS = {
    "time_of_wetness": (0.0, 10.0, 29.0, 31.0, 60.6, 120.0, 300.0),
    "freeze_thaw_events": (0.0, 2.0, 4.0, 5.0, 6.0, 12.0),
    "indoor_so2_annual": (2.0, 8.0, 11.0, 13.0, 30.0),
    "indoor_pm10_annual": (5.0, 12.0, 19.0, 21.0, 40.0),
    "max_risk": (0.1, 0.5, 0.79, 0.81, 0.9),
    "mean_risk": (0.05, 0.3),
    "rh_indoor_minus_outdoor": (-4.0, 0.0, 2.0, 4.0),
    "iso_category": (1, 2, 3),
}

_FLAG_NAMES = DecisionInput._BOOL_FIELDS
_RANDOM_DRAWS = 220
_GRID_SEED = 94823
# every sampled situation is mirrored with this offset on a feature no rule
# references, so each labeled region holds at least two inseparable members
# and the minimum leaf size never blocks a purifying split
_MIRROR_OFFSET = 0.001


def _situation(**overrides):
    doc = dict(_BASE_SITUATION)
    doc.update(overrides)
    return DecisionInput(**doc)


def default_training_inputs(rules=None):
    """The shipped sampling plan.

    A full factorial over the equipment flags, sweeps straddling every rule
    threshold, a museum-hangar anchor point with an in-region partner, and
    seeded random level combinations.  Each deduplicated row is then
    mirrored with a tiny offset on the one feature no rule references;
    mirror pairs share labels and are separable only by an exactly gainless
    split, so they traverse the tree together and the default minimum leaf
    size of two never prevents reaching zero training error.
    """
    rules = rules if rules is not None else load_rules()
    inputs = []

    for bits in itertools.product((False, True), repeat=len(_FLAG_NAMES)):
        inputs.append(_situation(**dict(zip(_FLAG_NAMES, bits))))

    for ft, heating, insulation in itertools.product(
        _GRID_LEVELS["freeze_thaw_events"], (False, True), (False, True)
    ):
        inputs.append(
            _situation(
                freeze_thaw_events=ft,
                heating_installed=heating,
                insulation_installed=insulation,
            )
        )
    for tow, insulation in itertools.product(
        _GRID_LEVELS["time_of_wetness"], (False, True)
    ):
        inputs.append(_situation(time_of_wetness=tow, insulation_installed=insulation))
    for so2, filters in itertools.product(
        _GRID_LEVELS["indoor_so2_annual"], (False, True)
    ):
        inputs.append(_situation(indoor_so2_annual=so2, filters_installed=filters))
    for pm10, filters in itertools.product(
        _GRID_LEVELS["indoor_pm10_annual"], (False, True)
    ):
        inputs.append(_situation(indoor_pm10_annual=pm10, filters_installed=filters))
    for peak, ac, rh_delta in itertools.product(
        _GRID_LEVELS["max_risk"], (False, True), _GRID_LEVELS["rh_indoor_minus_outdoor"]
    ):
        inputs.append(
            _situation(max_risk=peak, ac_installed=ac, rh_indoor_minus_outdoor=rh_delta)
        )

    # unheated, uninsulated, carpeted museum hangar with a wet winter, plus
    # an in-region partner so its labeling never sits alone in a leaf
    for ft in (12.0, 6.0):
        inputs.append(
            _situation(
                carpets_installed=True,
                time_of_wetness=60.6,
                iso_category=2,
                mean_risk=0.2,
                max_risk=0.5,
                freeze_thaw_events=ft,
                indoor_so2_annual=3.2,
                indoor_pm10_annual=9.0,
            )
        )

    rng = random.Random(_GRID_SEED)
    for _ in range(_RANDOM_DRAWS):
        overrides = {name: rng.random() < 0.5 for name in _FLAG_NAMES}
        for feature, levels in _GRID_LEVELS.items():
            overrides[feature] = rng.choice(levels)
        inputs.append(_situation(**overrides))

    deduped = []
    seen = set()
    for inp in inputs:
        fv = feature_vector(inp)
        if fv not in seen:
            seen.add(fv)
            deduped.append(inp)

    mirrored = []
    for inp in deduped:
        mirrored.append(inp)
        mirrored.append(
            replace(inp, indoor_pm25_annual=inp.indoor_pm25_annual + _MIRROR_OFFSET)
        )
    return mirrored


def default_corpus(rules=None):
    """Shipped rules applied over the shipped sampling plan."""
    rules = rules if rules is not None else load_rules()
    return build_training_corpus(rules, default_training_inputs(rules))
