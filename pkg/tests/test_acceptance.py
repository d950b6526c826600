"""Acceptance suite: one test per exit criterion, each printing a pass line.

The heavyweight synthetic datasets are built once per session through the
CLI and shared; each criterion's reported runtime includes the fixtures it
depends on.  Criteria 8-10 run the batch pipeline on the desk-scale chirp
profile (configs/fast.cfg); criteria 1-6 use the full default profile.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from helpers import line_scene, point, static_scene
from mmgesture import dataset as ds
from mmgesture import dsp, pointcloud
from mmgesture.cli import main as cli_main
from mmgesture.frontend import DEFAULT_CONFIG, if_tone_params, synthesize_frame, virtual_array_for
from mmgesture.nn import GestureNet, TrainConfig, evaluate, train
from mmgesture.pointcloud import FramePoints, build_sample

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
FAST = str(CONFIGS / "fast.cfg")
GESTURES = ["knock", "left_swipe", "right_swipe", "rotate"]
INTERFERENCE = ["interference_tiny", "interference_walk_run"]


def report(num, name, elapsed, budget, detail=""):
    suffix = f" | {detail}" if detail else ""
    print(f"[criterion {num:02d}] {name}: PASS ({elapsed:.1f}s of {budget:.0f}s budget){suffix}")
    assert elapsed < budget, f"criterion {num} exceeded its {budget}s budget"


def simulate_cli(out_dir, presets, count, seed):
    t0 = time.perf_counter()
    code = cli_main(["simulate", "--preset", ",".join(presets),
                     "--count", str(count), "--seed", str(seed),
                     "--config", FAST, "--out", str(out_dir), "--workers", "2"])
    assert code == 0
    return time.perf_counter() - t0


def load_xy(out_dir, class_names=None):
    manifest = ds.load_manifest(Path(out_dir) / "manifest.json")
    samples = ds.load_samples(manifest, out_dir)
    names = class_names or ds.class_names_for([s.label for s in samples])
    X, y = ds.tensors_from_samples(samples, names)
    return X, y, names


@pytest.fixture(scope="session")
def gesture_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("accept") / "gestures"
    presets = ["knock", "left-swipe", "right-swipe", "rotate"]
    seconds = simulate_cli(out, presets, count=100, seed=42)
    return {"dir": out, "seconds": seconds}


@pytest.fixture(scope="session")
def interference_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("accept") / "interference"
    seconds = simulate_cli(out, ["tiny", "walk-run"], count=100, seed=43)
    return {"dir": out, "seconds": seconds}


@pytest.fixture(scope="session")
def gesture_model(gesture_dataset):
    t0 = time.perf_counter()
    X, y, names = load_xy(gesture_dataset["dir"])
    train_idx, test_idx = ds.stratified_split(y, 0.2, seed=0)
    model = GestureNet(n_classes=len(names), seed=0)
    history = train(model, X[train_idx], y[train_idx],
                    TrainConfig(epochs=60, batch_size=64, lr=0.001, seed=0))
    return {"model": model, "X": X, "y": y, "names": names,
            "train_idx": train_idx, "test_idx": test_idx,
            "history": history, "seconds": time.perf_counter() - t0}


def test_c01_if_tone_oracle():
    t0 = time.perf_counter()
    cfg = DEFAULT_CONFIG
    bin_width = cfg.adc_rate / cfg.samples_per_chirp
    rng = np.random.default_rng(1)
    worst = 0
    for r in rng.uniform(0.5, 9.0, 100):
        cube = synthesize_frame(static_scene((0.0, r, 0.0)), cfg, 0.0)
        spectrum = np.abs(np.fft.fft(cube.data[0, 0]))
        got = int(np.argmax(spectrum))
        expected = round(if_tone_params(cfg, r)[0] / bin_width)
        worst = max(worst, abs(got - expected))
        assert abs(got - expected) <= 1
    report(1, "IF-tone bin oracle (100 ranges)", time.perf_counter() - t0, 10,
           f"max bin error {worst}")


def test_c02_velocity_oracle():
    t0 = time.perf_counter()
    cfg = DEFAULT_CONFIG
    rng = np.random.default_rng(2)
    worst = 0
    for v in rng.uniform(-0.95, 0.95, 50) * cfg.max_unambiguous_velocity:
        scene = line_scene((0.0, 4.0, 0.0), (0.0, v, 0.0), duration=0.2)
        rd = dsp.range_doppler(synthesize_frame(scene, cfg, 0.0))
        _, dbin = np.unravel_index(np.argmax(rd.summed), rd.summed.shape)
        err = abs(int(dbin) - rd.zero_doppler_bin - round(v / rd.velocity_resolution))
        worst = max(worst, err)
        assert err <= 1
    report(2, "Doppler bin oracle (50 velocities)", time.perf_counter() - t0, 10,
           f"max bin error {worst}")


def test_c03_aoa_oracle():
    t0 = time.perf_counter()
    cfg = DEFAULT_CONFIG
    array = virtual_array_for(cfg.n_tx, cfg.n_rx)
    rng = np.random.default_rng(3)
    worst = 0.0
    for deg in rng.uniform(-45.0, 45.0, 50):
        az_true = np.deg2rad(deg)
        pos = (2.4 * np.sin(az_true), 2.4 * np.cos(az_true), 0.0)
        rd = dsp.range_doppler(synthesize_frame(static_scene(pos), cfg, 0.0))
        rbin = int(np.argmax(rd.summed[:, rd.zero_doppler_bin]))
        az, _ = dsp.estimate_aoa(rd.spectra[:, rbin, rd.zero_doppler_bin], array)
        worst = max(worst, abs(np.rad2deg(az) - deg))
    assert worst <= 2.0
    report(3, "AoA oracle (50 azimuths in +-45 deg)", time.perf_counter() - t0, 10,
           f"max error {worst:.2f} deg")


def test_c04_cfar_calibration_and_scaling():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    cells = rng.exponential(1.0, (2000, 53))
    cfg = dsp.CfarConfig(pfa=1e-3)
    hits = dsp.cfar_detect(cells, cfg)
    eligible = 2000 * (53 - 3)
    rate = len(hits) / eligible
    assert eligible >= 100_000
    assert 0.5e-3 <= rate <= 2e-3
    base = [(h[0], h[1]) for h in hits]
    for k in (0.01, 1.0, 100.0):
        scaled = [(h[0], h[1]) for h in dsp.cfar_detect(cells * k, cfg)]
        assert scaled == base
    report(4, "CA-CFAR calibration + scale invariance", time.perf_counter() - t0, 30,
           f"false-alarm rate {rate:.2e} on {eligible} cells")


def test_c05_pointcloud_algebra():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    for trial in range(5):
        frames = [FramePoints(j, [point(*rng.normal(size=4),
                                        intensity=float(rng.uniform(1, 50)))
                                  for _ in range(int(rng.integers(0, 90)))])
                  for j in range(pointcloud.N_FRAMES)]
        sample = build_sample(frames, "rotate")
        assert sample.tensor.shape == (5, 30, 65)
        mask = np.any(sample.tensor[:, :, 1:] != 0, axis=0)
        if mask.any():
            deltas = sample.tensor[:, :, 1:][:, mask]
            assert np.abs(deltas.mean(axis=1)).max() < 1e-9
    # exact translation covariance on dyadic inputs (32 points, dyadic shift)
    base = [point(x=float(rng.integers(-8, 8)) / 8, y=float(rng.integers(0, 32)) / 8,
                  z=float(rng.integers(-8, 8)) / 8, v=float(rng.integers(-4, 4)) / 4,
                  intensity=float(rng.integers(1, 16))) for _ in range(32)]
    shift = (0.5, -2.25, 1.75)
    moved = [point(p.x + shift[0], p.y + shift[1], p.z + shift[2], p.v, p.intensity)
             for p in base]
    frames_a = [FramePoints(0, base)] + [FramePoints(j, []) for j in range(1, 30)]
    frames_b = [FramePoints(0, moved)] + [FramePoints(j, []) for j in range(1, 30)]
    ta, tb = build_sample(frames_a, "knock").tensor, build_sample(frames_b, "knock").tensor
    assert np.array_equal(ta[:, :, 1:], tb[:, :, 1:])
    assert np.array_equal(tb[:3, 0, 0] - ta[:3, 0, 0], np.array(shift))
    report(5, "point-cloud centering/translation/shape", time.perf_counter() - t0, 5)


def test_c06_gradient_suite():
    from test_nn_layers import (CONV_CASES, check_input_grad, check_param_grad,
                                max_rel_error, numeric_grad)
    from mmgesture.nn import (BatchNorm2d, Conv2d, Linear, MaxPool2d, ReLU,
                              ResidualBlock, softmax_cross_entropy)
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    for case in CONV_CASES:
        layer = Conv2d(case["in_ch"], case["out_ch"], case["kernel"],
                       stride=case["stride"], padding=case["padding"],
                       bias=True, rng=rng)
        x = rng.standard_normal((2, case["in_ch"], *case["hw"]))
        check_input_grad(layer, x)
        check_param_grad(layer, x, layer.weight)
    for shape in [(2, 3, 4, 5), (1, 2, 6, 3), (4, 1, 3, 3), (3, 4, 2, 2), (2, 2, 5, 7)]:
        layer = BatchNorm2d(shape[1])
        x = rng.standard_normal(shape) * 2
        check_input_grad(layer, x)
        check_param_grad(layer, x, layer.gamma)
        relu_x = rng.standard_normal(shape)
        relu_x[np.abs(relu_x) < 1e-3] = 0.5
        check_input_grad(ReLU(), relu_x)
    for shape in [(2, 2, 7, 8), (1, 3, 6, 6), (2, 1, 5, 5), (1, 2, 15, 33), (2, 2, 4, 9)]:
        x = rng.permutation(np.arange(np.prod(shape), dtype=float) * 0.01).reshape(shape)
        check_input_grad(MaxPool2d(3, 2, 1), x)
    for n_in in (4, 6, 8, 10, 12):
        layer = Linear(n_in, 3, rng=rng)
        x = rng.standard_normal((3, n_in))
        check_input_grad(layer, x)
        check_param_grad(layer, x, layer.weight)
    for stride, chans in [(1, (3, 3)), (2, (2, 4)), (1, (2, 2)), (2, (1, 3)), (2, (4, 4))]:
        block = ResidualBlock(chans[0], chans[1], stride=stride, rng=rng)
        check_input_grad(block, rng.standard_normal((2, chans[0], 6, 7)))
    for n in (2, 3, 4, 6, 8):
        logits = rng.standard_normal((n, 4))
        labels = rng.integers(0, 4, n)
        _, dlogits, _ = softmax_cross_entropy(logits, labels)
        numeric = numeric_grad(lambda: softmax_cross_entropy(logits, labels)[0], logits)
        assert max_rel_error(dlogits, numeric) < 1e-4
    report(6, "finite-difference gradient suite", time.perf_counter() - t0, 60)


def test_c07_overfit_capacity(tmp_path):
    t0 = time.perf_counter()
    out = tmp_path / "tiny32"
    sim_s = simulate_cli(out, ["knock", "left-swipe", "right-swipe", "rotate"],
                         count=8, seed=99)
    X, y, names = load_xy(out)
    assert X.shape[0] == 32
    model = GestureNet(n_classes=4, seed=1)
    history = train(model, X, y,
                    TrainConfig(epochs=200, batch_size=64, lr=0.001, seed=1))
    first_perfect = next((r["epoch"] for r in history if r["accuracy"] == 1.0), None)
    assert first_perfect is not None, "never reached 100% train accuracy"
    _, eval_acc = evaluate(model, X, y, names)  # inference mode on the train set
    assert eval_acc >= 0.99
    elapsed = time.perf_counter() - t0
    report(7, "overfit capacity (32 samples, stock hyperparameters)", elapsed, 300,
           f"sim {sim_s:.0f}s, first 100% at epoch {first_perfect}, "
           f"eval-mode {eval_acc * 100:.0f}%")


def test_c08_end_to_end_recognition(gesture_dataset, gesture_model):
    t0 = time.perf_counter()
    m = gesture_model
    _, test_acc = evaluate(m["model"], m["X"][m["test_idx"]], m["y"][m["test_idx"]],
                           m["names"])
    elapsed = (time.perf_counter() - t0 + gesture_dataset["seconds"]
               + gesture_model["seconds"])
    assert test_acc >= 0.85, f"held-out accuracy {test_acc:.3f} < 0.85"
    report(8, "end-to-end synthetic recognition (4x100, 80/20)", elapsed, 1800,
           f"test accuracy {test_acc * 100:.1f}% "
           f"(sim {gesture_dataset['seconds']:.0f}s, train {gesture_model['seconds']:.0f}s)")


def test_c09_interference_retraining(gesture_dataset, interference_dataset,
                                     gesture_model):
    t0 = time.perf_counter()
    # stage 1: the 4-class model has no interference classes, so interference
    # scenes are necessarily mistaken for gestures
    Xi, yi, _ = load_xy(interference_dataset["dir"], class_names=INTERFERENCE)
    preds4 = gesture_model["model"].predict(Xi)
    as_gesture = float(np.mean(preds4 < 4))
    assert as_gesture >= 0.25

    # stage 2: retrain with the two interference classes added
    names6 = GESTURES + INTERFERENCE
    Xg, yg, _ = load_xy(gesture_dataset["dir"], class_names=names6)
    Xi6, yi6, _ = load_xy(interference_dataset["dir"], class_names=names6)
    X = np.concatenate([Xg, Xi6])
    y = np.concatenate([yg, yi6])
    train_idx, test_idx = ds.stratified_split(y, 0.2, seed=1)
    model6 = GestureNet(n_classes=6, seed=2)
    train(model6, X[train_idx], y[train_idx],
          TrainConfig(epochs=60, batch_size=64, lr=0.001, seed=2))
    test_y = y[test_idx]
    interf_mask = test_y >= 4
    preds6 = model6.predict(X[test_idx][interf_mask])
    rejection = float(np.mean(preds6 >= 4))
    assert rejection >= 0.90, f"interference rejection {rejection:.3f} < 0.90"
    elapsed = (time.perf_counter() - t0 + gesture_dataset["seconds"]
               + interference_dataset["seconds"] + gesture_model["seconds"])
    report(9, "interference retraining analog", elapsed, 2700,
           f"4-class mistakes {as_gesture * 100:.0f}% of interference for gestures; "
           f"6-class rejection {rejection * 100:.1f}% on {int(interf_mask.sum())} scenes")


def test_c10_cli_determinism(tmp_path):
    t0 = time.perf_counter()
    digests = []
    for name in ("one", "two"):
        out = tmp_path / name
        assert cli_main(["simulate", "--preset", ",".join(
            ["knock", "left-swipe", "right-swipe", "rotate"]),
            "--count", "2", "--seed", "7", "--config", FAST,
            "--out", str(out), "--workers", "2"]) == 0
        data = {p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))}
        data["manifest.json"] = (out / "manifest.json").read_bytes()
        run_dir = tmp_path / f"train-{name}"
        assert cli_main(["train", "--manifest", str(out / "manifest.json"),
                         "--out", str(run_dir), "--epochs", "3",
                         "--batch-size", "4", "--split-seed", "5",
                         "--train-seed", "5"]) == 0
        data["model.ckpt"] = (run_dir / "model.ckpt").read_bytes()
        data["history.csv"] = (run_dir / "history.csv").read_bytes()
        digests.append(data)
    assert digests[0].keys() == digests[1].keys()
    for key in digests[0]:
        assert digests[0][key] == digests[1][key], f"{key} differs between reruns"
    report(10, "simulate/train byte-determinism", time.perf_counter() - t0, 600,
           f"{len(digests[0])} artifacts compared")
