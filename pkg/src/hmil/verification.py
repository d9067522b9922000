"""Executable checks of the model family's checkable claims.

Four groups:

* invariants: permutation insensitivity, the singleton-mean identity,
  exact collapse of the two-matrix bag variant, gradient agreement with
  finite differences, embedding bounds, and the full schema pipeline on
  random documents;
* concentration: how fast outputs stabilize as bags grow;
* benchmarks: three train-and-measure tasks, each paired with a
  no-signal control that must score near chance;
* an unbiased MMD^2 estimator as the kernel baseline.

Every entry point is seeded and returns plain dicts of floats, so a
repeated run reproduces reports byte for byte.  Wall-clock timing never
enters a report; callers wanting it measure around these functions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .batching import build_batch
from .encoding import encode_document
from .generators import permute_bags, random_document, random_schema
from .model import (
    Model,
    ModelConfig,
    build_model,
    build_two_matrix_variant,
    collapse_equivalence_check,
    collapse_model,
    embed,
    embedding_bound,
    forward,
    forward_with_embeddings,
)
from .nn import IDENTITY, Tape, Tensor, backward, dense_forward, segment_mean
from .schema import Bag, NumericLeaf, SchemaError, infer_schema, validate
from .training import (
    TrainConfig,
    evaluate_accuracy,
    train,
)

__all__ = [
    "SUITE_NAMES",
    "MmdResult",
    "concentration_experiment",
    "run_concentration",
    "benchmark_variance_task",
    "benchmark_nested_task",
    "benchmark_product_task",
    "mmd_baseline",
    "check_permutation_invariance",
    "check_dirac_identity",
    "check_matrix_collapse",
    "check_gradients",
    "check_embedding_bounds",
    "check_pipeline_round_trip",
    "run_invariants",
    "run_benchmarks",
    "run_suite",
    "summarize_report",
]

SUITE_NAMES = ("invariants", "concentration", "benchmarks", "all")

PLAIN_BAG = Bag(count=1, child=NumericLeaf(count=1, mean=0.0, std=1.0))


def _encode_batch(raw_docs, schema):
    return build_batch([encode_document(d, schema) for d in raw_docs], schema)


def _inferable_case(rng, max_depth, n_docs, min_depth=1):
    """Random generator schema, documents, and the schema inferred back
    from them.  Redraws until inference succeeds (it fails only when
    some array came out empty in every document)."""
    while True:
        depth = int(rng.integers(min_depth, max_depth + 1))
        gen = random_schema(rng, max_depth=depth, require_bag=True)
        raw = [random_document(rng, gen) for _ in range(n_docs)]
        try:
            return infer_schema(raw), raw
        except SchemaError:
            continue


def _random_config(rng, aggregation=None, activation=None,
                   output_dim=2) -> ModelConfig:
    return ModelConfig(
        embed_dim=4, hidden_dim=4, output_dim=output_dim,
        activation=activation or str(rng.choice(["tanh", "relu"])),
        aggregation=aggregation or str(rng.choice(["mean", "max", "meanmax"])),
        seed=int(rng.integers(2**31)))


# ---------------------------------------------------------------------------
# invariant checks


def check_permutation_invariance(seed: int, cases: int = 1000) -> dict:
    """Forward outputs must not move when any bag's elements are
    reordered, at any nesting depth."""
    rng = np.random.default_rng([seed, 11])
    worst = 0.0
    for _ in range(cases):
        schema, raw = _inferable_case(rng, max_depth=3,
                                      n_docs=int(rng.integers(2, 5)))
        model = build_model(schema, _random_config(rng))
        base = forward(model, _encode_batch(raw, schema)).data
        shuffled = [permute_bags(rng, doc, schema) for doc in raw]
        out = forward(model, _encode_batch(shuffled, schema)).data
        worst = max(worst, float(np.max(np.abs(out - base), initial=0.0)))
    return {"name": "permutation_invariance", "passed": worst < 1e-9,
            "details": {"cases": cases, "max_deviation": worst,
                        "bound": 1e-9}}


def check_dirac_identity(seed: int, cases: int = 1000) -> dict:
    """A mean-pooled bag embedding equals the average of the embeddings
    of its elements taken as singleton bags."""
    rng = np.random.default_rng([seed, 12])
    worst = 0.0
    done = 0
    while done < cases:
        inner = random_schema(rng, max_depth=int(rng.integers(0, 3)))
        items = [random_document(rng, inner)
                 for _ in range(int(rng.integers(1, 5)))]
        try:
            schema = infer_schema([items])
        except SchemaError:
            continue
        model = build_model(schema, _random_config(
            rng, aggregation="mean"))
        whole = embed(model, _encode_batch([items], schema), "$")
        singles = embed(model, _encode_batch([[it] for it in items], schema),
                        "$")
        worst = max(worst, float(np.max(np.abs(whole[0] - singles.mean(axis=0)))))
        done += 1
    return {"name": "dirac_identity", "passed": worst < 1e-9,
            "details": {"cases": cases, "max_deviation": worst,
                        "bound": 1e-9}}


def check_matrix_collapse(seed: int, models: int = 100,
                          batches_per_model: int = 10) -> dict:
    """The two-matrix bag variant and its collapsed form agree."""
    rng = np.random.default_rng([seed, 13])
    worst = 0.0
    for _ in range(models):
        # infer from the union so every batch validates against the schema
        schema, raw = _inferable_case(rng, max_depth=3,
                                      n_docs=3 * batches_per_model)
        config = _random_config(rng, aggregation="mean")
        two = build_two_matrix_variant(schema, config,
                                       inner_dim=int(rng.integers(2, 7)))
        one = collapse_model(two)
        batches = [_encode_batch(raw[i:i + 3], schema)
                   for i in range(0, len(raw), 3)]
        worst = max(worst, float(collapse_equivalence_check(two, one, batches)))
    return {"name": "matrix_collapse", "passed": worst < 1e-10,
            "details": {"models": models,
                        "batches_per_model": batches_per_model,
                        "max_deviation": worst, "bound": 1e-10}}


def _fd_max_rel_error(model: Model, batch, eps: float = 1e-5) -> float:
    squash = Tensor(np.full((model.config.output_dim, 1), 0.37))

    def scalar_loss(tape=None):
        out = forward(model, batch, tape)
        col = dense_forward(out, squash, None, IDENTITY, tape)
        return segment_mean(col, [0, col.rows], tape)

    tape = Tape()
    grads = backward(tape, scalar_loss(tape))
    worst = 0.0
    for p in model.parameters():
        g = grads.get(p, np.zeros(p.data.shape))
        it = np.nditer(p.data, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p.data[idx]
            p.data[idx] = orig + eps
            up = scalar_loss().data[0, 0]
            p.data[idx] = orig - eps
            down = scalar_loss().data[0, 0]
            p.data[idx] = orig
            fd = (up - down) / (2 * eps)
            denom = max(abs(g[idx]), abs(fd), 1e-4)
            worst = max(worst, abs(g[idx] - fd) / denom)
    return worst


def check_gradients(seed: int) -> dict:
    """Tape gradients against central finite differences, through a
    nested model exercising every node kind and both activations."""
    raw = [{"tag": "a", "runs": [{"speed": [1.0, 2.0], "kind": "x"},
                                 {"speed": [0.5], "kind": "y"}]},
           {"tag": "b", "runs": []},
           {"tag": "a", "runs": [{"speed": [], "kind": "x"}]}]
    schema = infer_schema(raw)
    batch = _encode_batch(raw, schema)
    worst = 0.0
    for i, activation in enumerate(("tanh", "relu")):
        for aggregation in ("mean", "max", "meanmax"):
            model = build_model(schema, ModelConfig(
                embed_dim=3, hidden_dim=4, output_dim=2,
                activation=activation, aggregation=aggregation,
                seed=seed + i))
            worst = max(worst, float(_fd_max_rel_error(model, batch)))
    return {"name": "gradient_check", "passed": worst < 1e-4,
            "details": {"max_rel_error": worst, "bound": 1e-4}}


def check_embedding_bounds(seed: int, documents: int = 10000,
                           docs_per_schema: int = 100) -> dict:
    """Every tanh bag embedding stays inside its analytic coordinate
    bound.  The slack of 1e-12 covers float rounding only."""
    rng = np.random.default_rng([seed, 14])
    violations = 0
    seen = 0
    while seen < documents:
        schema, raw = _inferable_case(rng, max_depth=3,
                                      n_docs=docs_per_schema)
        model = build_model(schema, _random_config(rng, activation="tanh"))
        _, embeddings = forward_with_embeddings(model,
                                                _encode_batch(raw, schema))
        for path, e in embeddings.items():
            bound = embedding_bound(model, path)
            violations += int(np.sum(np.abs(e.data) > bound + 1e-12))
        seen += len(raw)
    return {"name": "embedding_bound", "passed": violations == 0,
            "details": {"documents": seen, "violations": violations}}


def check_pipeline_round_trip(seed: int, schemas: int = 10,
                              docs_per_schema: int = 1000) -> dict:
    """infer -> validate -> encode -> batch on random corpora: every
    generated document must validate cleanly and batch to full size."""
    rng = np.random.default_rng([seed, 15])
    violations = 0
    batched = 0
    for _ in range(schemas):
        schema, raw = _inferable_case(rng, max_depth=3,
                                      n_docs=docs_per_schema)
        for doc in raw:
            violations += len(validate(doc, schema))
        batch = _encode_batch(raw, schema)
        if batch.batch_size == len(raw):
            batched += len(raw)
    ok = violations == 0 and batched == schemas * docs_per_schema
    return {"name": "pipeline_round_trip", "passed": ok,
            "details": {"schemas": schemas,
                        "documents": schemas * docs_per_schema,
                        "violations": violations, "batched": batched}}


def run_invariants(seed: int, perm_cases: int = 1000,
                   dirac_cases: int = 1000, collapse_models: int = 100,
                   bound_documents: int = 10000,
                   pipeline_schemas: int = 10) -> dict:
    checks = [
        check_permutation_invariance(seed, cases=perm_cases),
        check_dirac_identity(seed, cases=dirac_cases),
        check_matrix_collapse(seed, models=collapse_models),
        check_gradients(seed),
        check_embedding_bounds(seed, documents=bound_documents),
        check_pipeline_round_trip(seed, schemas=pipeline_schemas),
    ]
    return {"suite": "invariants", "seed": seed, "checks": checks,
            "passed": all(c["passed"] for c in checks)}


# ---------------------------------------------------------------------------
# concentration


def concentration_experiment(model: Model, schema, generator,
                             bag_sizes, repeats: int,
                             rng: np.random.Generator,
                             ref_factor: int = 100) -> dict:
    """Median |f(bag of size l) - f(reference bag)| per bag size.

    ``generator(rng, size)`` samples one bag of i.i.d. instances.  The
    reference output stands in for the infinite-sample value; the
    reference bag holds ``ref_factor`` times the largest tested size,
    putting its own error well below the measured deviations.
    """
    sizes = sorted(bag_sizes)
    ref_doc = generator(rng, ref_factor * max(sizes))
    f_ref = forward(model, _encode_batch([ref_doc], schema)).data[0, 0]
    table = {}
    for size in sizes:
        docs = [generator(rng, size) for _ in range(repeats)]
        out = forward(model, _encode_batch(docs, schema)).data[:, 0]
        table[size] = float(np.median(np.abs(out - f_ref)))
    return table


def run_concentration(seed: int, bag_sizes=(4, 16, 64, 256),
                      repeats: int = 200) -> dict:
    rng = np.random.default_rng([seed, 21])
    model = build_model(PLAIN_BAG, ModelConfig(
        output_dim=1, seed=int(rng.integers(2**31))))

    def generator(r, size):
        return [float(v) for v in r.normal(0.0, 1.0, size)]

    table = concentration_experiment(model, PLAIN_BAG, generator,
                                     bag_sizes, repeats, rng)
    sizes = sorted(table)
    medians = [table[s] for s in sizes]
    inversions = sum(1 for a, b in zip(medians, medians[1:]) if b > a)
    ratio = medians[-1] / medians[0] if medians[0] > 0 else float("inf")
    passed = inversions <= 1 and ratio < 0.25
    check = {"name": "concentration_decay", "passed": passed,
             "details": {"bag_sizes": sizes, "medians": medians,
                         "repeats": repeats, "inversions": inversions,
                         "max_inversions": 1,
                         "ratio_largest_over_smallest": ratio,
                         "ratio_bound": 0.25}}
    return {"suite": "concentration", "seed": seed, "checks": [check],
            "passed": passed}


# ---------------------------------------------------------------------------
# benchmarks


_BENCH_TRAIN = TrainConfig(epochs=30, batch_size=64, learning_rate=3e-3)


def _antithetic_bag(rng, sigma: float, size: int) -> list:
    """Bag of draws from N(0, sigma^2) in +/- pairs, so the bag's
    empirical mean is exactly zero regardless of sigma."""
    half = rng.normal(0.0, sigma, size // 2)
    return [float(v) for pair in zip(half, -half) for v in pair]


def benchmark_variance_task(seed: int = 0, n_train: int = 2000,
                            n_test: int = 500, bag_size: int = 50,
                            train_config: TrainConfig | None = None) -> dict:
    """Equal-mean scale discrimination: bags of 50 draws with sigma 1
    against sigma 2.  The instance-mean baseline sees a feature that is
    identically zero, so anything it scores above chance would expose a
    harness bug; the shuffled-label control guards the trainer itself."""
    rng = np.random.default_rng([seed, 41])

    def make_split(n):
        raw, labels = [], []
        for i in range(n):
            label = i % 2
            raw.append(_antithetic_bag(rng, 2.0 if label else 1.0, bag_size))
            labels.append(label)
        return raw, labels

    train_raw, train_labels = make_split(n_train)
    test_raw, test_labels = make_split(n_test)
    schema = infer_schema(train_raw)
    config = ModelConfig(output_dim=2, seed=int(rng.integers(2**31)))
    tc = train_config or _BENCH_TRAIN

    mil = build_model(schema, config)
    train(mil, [encode_document(d, schema) for d in train_raw],
          np.array(train_labels), tc)
    test_docs = [encode_document(d, schema) for d in test_raw]
    mil_acc = evaluate_accuracy(mil, test_docs, test_labels)

    mean_raw = [[float(np.mean(bag))] for bag in train_raw]
    mean_schema = infer_schema(mean_raw)
    baseline = build_model(mean_schema, config)
    train(baseline, [encode_document(d, mean_schema) for d in mean_raw],
          np.array(train_labels), tc)
    base_acc = evaluate_accuracy(
        baseline,
        [encode_document([float(np.mean(bag))], mean_schema)
         for bag in test_raw],
        test_labels)

    shuffled_labels = np.random.default_rng([seed, 42]).permutation(
        np.array(train_labels))
    shuffled = build_model(schema, config)
    train(shuffled, [encode_document(d, schema) for d in train_raw],
          shuffled_labels, tc)
    shuffled_acc = evaluate_accuracy(shuffled, test_docs, test_labels)

    return {"mil_accuracy": float(mil_acc),
            "mean_baseline_accuracy": float(base_acc),
            "shuffled_accuracy": float(shuffled_acc),
            "n_train": n_train, "n_test": n_test, "bag_size": bag_size,
            "train_config": tc.__dict__ | {}}


def _grouped_doc(rng, n_bags: int, bag_size: int, coherent: bool) -> list:
    """One bags-of-bags document.  Instances are center + noise draws;
    the coherent class keeps each bag around its own center, the other
    class shuffles the same instances across bags.  Unions of the two
    classes are identically distributed, so any flat model working on
    the pooled instances is blind by construction."""
    centers = rng.normal(0.0, 1.0, n_bags)
    values = (np.repeat(centers, bag_size)
              + rng.normal(0.0, 1.0, n_bags * bag_size))
    if not coherent:
        values = rng.permutation(values)
    return [[float(v) for v in bag] for bag in values.reshape(n_bags, bag_size)]


def benchmark_nested_task(seed: int = 0, n_train: int = 1000,
                          n_test: int = 400, n_bags: int = 10,
                          bag_size: int = 20,
                          train_config: TrainConfig | None = None) -> dict:
    """Grouping detection in bags of bags: one class's inner bags stay
    near their own centers (wide inter-bag mean spread), the other's are
    random regroupings of the same kind of draws (narrow spread)."""
    rng = np.random.default_rng([seed, 43])

    def make_split(n):
        raw, labels = [], []
        for i in range(n):
            label = i % 2
            raw.append(_grouped_doc(rng, n_bags, bag_size,
                                    coherent=bool(label)))
            labels.append(label)
        return raw, labels

    train_raw, train_labels = make_split(n_train)
    test_raw, test_labels = make_split(n_test)
    schema = infer_schema(train_raw)
    config = ModelConfig(output_dim=2, seed=int(rng.integers(2**31)))
    tc = train_config or _BENCH_TRAIN

    nested = build_model(schema, config)
    train(nested, [encode_document(d, schema) for d in train_raw],
          np.array(train_labels), tc)
    nested_acc = evaluate_accuracy(
        nested, [encode_document(d, schema) for d in test_raw], test_labels)

    def flatten(doc):
        return [v for bag in doc for v in bag]

    flat_train = [flatten(d) for d in train_raw]
    flat_schema = infer_schema(flat_train)
    flat = build_model(flat_schema, config)
    train(flat, [encode_document(d, flat_schema) for d in flat_train],
          np.array(train_labels), tc)
    flat_acc = evaluate_accuracy(
        flat, [encode_document(flatten(d), flat_schema) for d in test_raw],
        test_labels)

    return {"nested_accuracy": float(nested_acc),
            "flat_accuracy": float(flat_acc),
            "n_train": n_train, "n_test": n_test,
            "bags_per_doc": n_bags, "bag_size": bag_size,
            "train_config": tc.__dict__ | {}}


def benchmark_product_task(seed: int = 0, n_train: int = 1500,
                           n_test: int = 500, bag_size: int = 80,
                           train_config: TrainConfig | None = None) -> dict:
    """Joint reasoning over a vector and a bag: the label is the sign
    of x0 flipped by whether bag1's variance parameter sits above 1.5.
    Marginally x0 carries zero information about the label."""
    rng = np.random.default_rng([seed, 44])

    def make_split(n):
        raw, labels, x_labels = [], [], []
        for i in range(n):
            high_var = i % 2
            x0, x1 = rng.normal(0.0, 1.0, 2)
            variance = 2.0 if high_var else 1.0
            doc = {"x0": float(x0), "x1": float(x1),
                   "readings": [float(v) for v in
                                rng.normal(0.0, np.sqrt(variance), bag_size)],
                   "noise": [float(v) for v in
                             rng.normal(0.0, 1.0, bag_size)]}
            raw.append(doc)
            labels.append(1 if x0 * (variance - 1.5) > 0 else 0)
            x_labels.append(1 if x0 > 0 else 0)
        return raw, labels, x_labels

    train_raw, train_labels, train_x_labels = make_split(n_train)
    test_raw, test_labels, test_x_labels = make_split(n_test)
    schema = infer_schema(train_raw)
    config = ModelConfig(output_dim=2, seed=int(rng.integers(2**31)))
    tc = train_config or _BENCH_TRAIN

    joint = build_model(schema, config)
    train(joint, [encode_document(d, schema) for d in train_raw],
          np.array(train_labels), tc)
    joint_acc = evaluate_accuracy(
        joint, [encode_document(d, schema) for d in test_raw], test_labels)

    def x_only(doc):
        return {"x0": doc["x0"], "x1": doc["x1"]}

    x_train = [x_only(d) for d in train_raw]
    x_schema = infer_schema(x_train)
    x_train_docs = [encode_document(d, x_schema) for d in x_train]
    x_test_docs = [encode_document(x_only(d), x_schema) for d in test_raw]

    marginal = build_model(x_schema, config)
    train(marginal, x_train_docs, np.array(train_labels), tc)
    marginal_acc = evaluate_accuracy(marginal, x_test_docs, test_labels)

    sanity = build_model(x_schema, config)
    train(sanity, x_train_docs, np.array(train_x_labels), tc)
    sanity_acc = evaluate_accuracy(sanity, x_test_docs, test_x_labels)

    return {"joint_accuracy": float(joint_acc),
            "x_only_accuracy": float(marginal_acc),
            "x_only_on_x_label_accuracy": float(sanity_acc),
            "n_train": n_train, "n_test": n_test, "bag_size": bag_size,
            "train_config": tc.__dict__ | {}}


# ---------------------------------------------------------------------------
# MMD baseline


@dataclass
class MmdResult:
    value: float
    n_left: int
    n_right: int
    seconds: float


def _pool(bags) -> np.ndarray:
    if isinstance(bags, np.ndarray):
        arr = bags
    else:
        arr = np.vstack([np.asarray(b, dtype=np.float64).reshape(len(b), -1)
                         for b in bags])
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return arr


def mmd_baseline(bags_a, bags_b, kernel_bandwidth: float) -> MmdResult:
    """Unbiased MMD^2 between pooled samples under an RBF kernel.

    Diagonals are excluded from every term (including the cross term
    when sample sizes match), so literal duplicates give exactly zero.
    Cost is quadratic in the pooled instance counts, which is the point
    of recording the runtime: the network embedding is linear instead.
    """
    if kernel_bandwidth <= 0:
        raise ValueError("kernel bandwidth must be positive")
    started = time.perf_counter()
    x, y = _pool(bags_a), _pool(bags_b)
    m, n = x.shape[0], y.shape[0]
    if m < 2 or n < 2:
        raise ValueError("the unbiased estimator needs >= 2 points per side")
    scale = -1.0 / (2.0 * kernel_bandwidth ** 2)

    def kernel(u, v):
        d = ((u[:, None, :] - v[None, :, :]) ** 2).sum(axis=2)
        return np.exp(scale * d)

    kxx, kyy, kxy = kernel(x, x), kernel(y, y), kernel(x, y)
    t_xx = (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
    t_yy = (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
    if m == n:
        t_xy = (kxy.sum() - np.trace(kxy)) / (m * (m - 1))
    else:
        t_xy = kxy.mean()
    value = t_xx + t_yy - 2.0 * t_xy
    return MmdResult(value=float(value), n_left=m, n_right=n,
                     seconds=time.perf_counter() - started)


def _mmd_checks(seed: int) -> dict:
    rng = np.random.default_rng([seed, 45])
    same = rng.normal(0.0, 1.0, (500, 1))
    identical = mmd_baseline(same, same, kernel_bandwidth=1.0).value
    left = rng.normal(0.0, 1.0, (500, 1))
    right = rng.normal(5.0, 1.0, (500, 1))
    separated = mmd_baseline(left, right, kernel_bandwidth=1.0).value
    flipped = mmd_baseline(right, left, kernel_bandwidth=1.0).value
    symmetry_gap = abs(separated - flipped)
    passed = (abs(identical) < 1e-12 and separated > 0.5
              and symmetry_gap < 1e-12)
    return {"name": "mmd_baseline", "passed": passed,
            "details": {"identical_value": identical,
                        "separated_value": separated,
                        "separation_bound": 0.5,
                        "symmetry_gap": symmetry_gap,
                        "points_per_side": 500}}


# ---------------------------------------------------------------------------
# suite assembly


def run_benchmarks(seed: int) -> dict:
    variance = benchmark_variance_task(seed)
    nested = benchmark_nested_task(seed)
    product = benchmark_product_task(seed)
    checks = [
        {"name": "variance_task",
         "passed": (variance["mil_accuracy"] >= 0.95
                    and variance["mean_baseline_accuracy"] <= 0.55
                    and variance["shuffled_accuracy"] <= 0.55),
         "details": variance | {"mil_bound": 0.95, "control_bound": 0.55}},
        {"name": "nested_task",
         "passed": (nested["nested_accuracy"] >= 0.9
                    and nested["flat_accuracy"] <= 0.55),
         "details": nested | {"nested_bound": 0.9, "control_bound": 0.55}},
        {"name": "product_task",
         "passed": (product["joint_accuracy"] >= 0.9
                    and abs(product["x_only_accuracy"] - 0.5) <= 0.05
                    and product["x_only_on_x_label_accuracy"] >= 0.95),
         "details": product | {"joint_bound": 0.9,
                               "control_band": [0.45, 0.55],
                               "sanity_bound": 0.95}},
        _mmd_checks(seed),
    ]
    return {"suite": "benchmarks", "seed": seed, "checks": checks,
            "passed": all(c["passed"] for c in checks)}


def run_suite(suite: str, seed: int) -> dict:
    """Run one named suite (or all three) and fold the results into a
    single report dict."""
    if suite not in SUITE_NAMES:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITE_NAMES}")
    if suite == "invariants":
        return run_invariants(seed)
    if suite == "concentration":
        return run_concentration(seed)
    if suite == "benchmarks":
        return run_benchmarks(seed)
    parts = [run_invariants(seed), run_concentration(seed),
             run_benchmarks(seed)]
    return {"suite": "all", "seed": seed,
            "checks": [c for part in parts for c in part["checks"]],
            "passed": all(part["passed"] for part in parts)}


def summarize_report(report: dict) -> str:
    """Plain-text table for humans; the JSON report is the artifact."""
    lines = [f"suite: {report['suite']}   seed: {report['seed']}",
             f"{'check':<28} {'result':<8} detail"]
    for check in report["checks"]:
        details = check["details"]
        shown = {k: v for k, v in details.items()
                 if isinstance(v, (int, float)) and not isinstance(v, bool)}
        brief = ", ".join(f"{k}={v:.3g}" if isinstance(v, float)
                          else f"{k}={v}" for k, v in list(shown.items())[:4])
        lines.append(f"{check['name']:<28} "
                     f"{'pass' if check['passed'] else 'FAIL':<8} {brief}")
    lines.append(f"overall: {'pass' if report['passed'] else 'FAIL'}")
    return "\n".join(lines)
