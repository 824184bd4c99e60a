"""End-to-end backdoor demonstration and defense evaluation (slow: trains
two models for 20 epochs each on CPU, ~10 minutes total).

Criteria printed as one line each (run with ``pytest -v -s``):
  backdoor effect   triggered-region d1 of the backdoored model is at most
                    0.5x the clean model's on the same inputs, while its
                    clean-input d1 stays within 0.02 of the clean baseline
  defense pattern   fine-tune-5 / prune-10 region-d1 gaps are measured and
                    reported (not hard-bounded at toy scale); compress-60
                    test inputs are byte-identical to the primary CLI's
"""
import copy
import hashlib
from pathlib import Path

import pytest

from toytrainer.data import load_dataset
from toytrainer.defend import apply_defense, compress_test_inputs
from toytrainer.evaluate import evaluate_attack, format_report
from toytrainer.train import TrainConfig, train

from .conftest import TOY_SCENE_FLAGS, run_primary

MAX_DEPTH = 16.0
PATCH = 8
EVAL_CONDITIONS = ("origin", "rotate", "fog")


def _report(name, ok, detail=""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def toy_world(tmp_path_factory):
    """400 training samples (10% poisoned with a plain on-object patch)
    plus 40 clean test samples, all built through the primary CLI."""
    root = tmp_path_factory.mktemp("world")
    tr_clean = root / "tr_clean"
    te_clean = root / "te_clean"
    tr_poisoned = root / "tr_poisoned"
    run_primary("scene-gen", "--n", "400", "--seed", "1", "--out", str(tr_clean), *TOY_SCENE_FLAGS)
    run_primary("scene-gen", "--n", "40", "--seed", "2", "--out", str(te_clean),
                "--split", "test", *TOY_SCENE_FLAGS)
    run_primary(
        "poison", "--index", str(tr_clean), "--rate", "0.10", "--seed", "3",
        "--patch", str(PATCH), "--theta-max", "0", "--recolor", "0", "--size-delta", "0",
        "--region-radius", "4", "--strict", "--out", str(tr_poisoned),
    )
    return root


@pytest.fixture(scope="module")
def trained(toy_world):
    cfg_clean = TrainConfig(data=str(toy_world / "tr_clean"), epochs=20, seed=0,
                            max_depth=MAX_DEPTH)
    cfg_poison = TrainConfig(data=str(toy_world / "tr_poisoned"), epochs=20, seed=0,
                             max_depth=MAX_DEPTH)
    clean_model, clean_hist = train(cfg_clean)
    poisoned_model, poisoned_hist = train(cfg_poison)
    assert clean_hist[-1]["loss"] < clean_hist[0]["loss"]
    assert poisoned_hist[-1]["loss"] < poisoned_hist[0]["loss"]
    return clean_model, poisoned_model, cfg_poison


@pytest.fixture(scope="module")
def attack_reports(toy_world, trained, tmp_path_factory):
    clean_model, poisoned_model, _ = trained
    work = tmp_path_factory.mktemp("attack_eval")
    te = toy_world / "te_clean"
    rep_clean = evaluate_attack(clean_model, te, work / "clean", patch_size=PATCH,
                                seed=500, max_depth=MAX_DEPTH, conditions=EVAL_CONDITIONS)
    rep_poison = evaluate_attack(poisoned_model, te, work / "poisoned", patch_size=PATCH,
                                 seed=500, max_depth=MAX_DEPTH, conditions=EVAL_CONDITIONS)
    print("\n--- clean model ---")
    print(format_report(rep_clean))
    print("--- backdoored model ---")
    print(format_report(rep_poison))
    return rep_clean, rep_poison


def test_criterion_toy_backdoor_effect(attack_reports):
    rep_clean, rep_poison = attack_reports
    clean_region = rep_clean["conditions"]["origin"]["region_d1"]
    poison_region = rep_poison["conditions"]["origin"]["region_d1"]
    d1_gap = abs(rep_poison["clean"]["d1"] - rep_clean["clean"]["d1"])
    effect_ok = poison_region <= 0.5 * clean_region
    functional_ok = d1_gap <= 0.02
    _report(
        "toy backdoor effect (region d1 <= 0.5x clean model, clean d1 within 0.02)",
        effect_ok and functional_ok,
        f"region_d1 {poison_region:.4f} vs clean {clean_region:.4f} "
        f"(ratio {poison_region / max(clean_region, 1e-9):.3f}), clean-d1 gap {d1_gap:.4f}",
    )


def test_criterion_defense_pattern(toy_world, trained, attack_reports, tmp_path):
    rep_clean, _ = attack_reports
    _, poisoned_model, cfg = trained
    clean_ds = load_dataset(toy_world / "tr_clean")
    te = toy_world / "te_clean"
    clean_region = rep_clean["conditions"]["origin"]["region_d1"]

    measured = {}
    for defense in ("fine-tune-5", "prune-10"):
        defended = apply_defense(copy.deepcopy(poisoned_model), defense, cfg, clean_ds)
        rep = evaluate_attack(defended, te, tmp_path / f"def_{defense}", patch_size=PATCH,
                              seed=500, max_depth=MAX_DEPTH, conditions=("origin",))
        measured[defense] = {
            "clean_d1": rep["clean"]["d1"],
            "region_d1": rep["conditions"]["origin"]["region_d1"],
        }
        print(f"{defense}: clean d1 {rep['clean']['d1']:.4f}, "
              f"triggered region d1 {rep['conditions']['origin']['region_d1']:.4f} "
              f"(clean model: {clean_region:.4f})")

    # compress-60 through the trainer is the primary CLI, byte for byte
    via_trainer = tmp_path / "via_trainer"
    via_cli = tmp_path / "via_cli"
    compress_test_inputs(te, via_trainer, quality=60)
    run_primary("compress", "--index", str(te), "--quality", "60", "--out", str(via_cli))

    def tree_hash(root: Path) -> str:
        h = hashlib.sha256()
        for p in sorted(root.rglob("*")):
            if p.is_file() and p.name != "run_config.json":
                h.update(p.relative_to(root).as_posix().encode())
                h.update(p.read_bytes())
        return h.hexdigest()

    compress_ok = tree_hash(via_trainer) == tree_hash(via_cli)
    reported_ok = all(0.0 <= m["region_d1"] <= 1.0 for m in measured.values())
    _report(
        "defense pattern (fine-tune/prune measured and reported, compress-60 byte-identical)",
        compress_ok and reported_ok,
        "; ".join(
            f"{d}: region_d1 {m['region_d1']:.3f}" for d, m in measured.items()
        ) + f"; compress identical={compress_ok}",
    )
