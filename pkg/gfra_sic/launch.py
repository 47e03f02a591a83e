#!/usr/bin/env python3
"""
Command line entry point.

    gfra-sic optimize --scenario 1 --frames 20000
    gfra-sic reduce-power --params outputs/optimize/params_alg1.json --scenario 1
    gfra-sic evaluate --params outputs/optimize/params_alg1.json --scenario 1
    gfra-sic baseline --scenario 4 --method greedy
    gfra-sic run --config workspace/experiments/config_default.yml --seeds 10
"""

import logging
import sys
from pathlib import Path
from typing import List, Optional

import tyro

from gfra_sic.data.config import ExperimentConfig, load_config, resolve_scenario
from gfra_sic.data.io import load_params, save_params
from gfra_sic.model.power_reduction import reduce_power
from gfra_sic.model.system import AllocationMatrix, ChannelMatrix, PowerVector, power_box
from gfra_sic.trainer.runner import (
    baseline_parameters,
    cell_channel,
    evaluate,
    method_slug,
    redraw_stream,
    run_experiment,
)
from gfra_sic.trainer.sic_trainer import FeasibilityCheck, initial_point, optimize
from gfra_sic.utils.constant import METHOD_ALG1, METHOD_ALG1_L1, METHOD_ALOHA
from gfra_sic.utils.rng import CellStreams

logger = logging.getLogger(__name__)


def setup_logging(debug: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if debug else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


def _config(config: Optional[str]) -> ExperimentConfig:
    return load_config(config) if config is not None else ExperimentConfig()


def _scenario(ref: str, config: ExperimentConfig):
    scenario_id, scenario = resolve_scenario(ref)
    if config.scenario_overrides:
        scenario = scenario.update(**config.scenario_overrides)
    return scenario_id, scenario


def _report(name: str, alloc, power, scenario, channel: ChannelMatrix) -> None:
    t_normalized, e_power = evaluate(alloc, power, scenario, channel)
    logger.info(f"{name}: T^N = {t_normalized:.6f}, E[P^T X] = {e_power:.6f}")


def optimize_cmd(
    scenario: str = "1",
    seed: int = 0,
    frames: Optional[int] = None,
    l1: bool = False,
    out: str = "outputs/optimize",
    config: Optional[str] = None,
    check_feasibility: bool = False,
    debug: bool = False,
) -> None:
    """Run the projected ADAGRAD optimization of (A, P) on one scenario.

    Args:
        scenario: Built-in scenario id (1..4) or a scenario JSON path.
        seed: Seed index of the run cell; selects the channel and activity streams.
        frames: Number of frames; defaults to the scenario's n_frames.
        l1: Add the l1 power penalty with the scenario's l1_weight.
        out: Output directory for params and trace files.
        config: Optional experiment YAML supplying loop settings and scenario overrides.
        check_feasibility: Verify every iterate lies in the feasible set.
        debug: Enable debug logging.
    """
    setup_logging(debug)
    cfg = _config(config)
    scenario_id, sc = _scenario(scenario, cfg)
    streams = CellStreams.from_seed(sc.seed, seed)
    channel = cell_channel(sc, streams)
    alloc, power = initial_point(sc, channel, streams.init())
    method = METHOD_ALG1_L1 if l1 else METHOD_ALG1
    logger.info(f"optimizing scenario {scenario_id} seed {seed} with {method}")

    alloc, power, trace = optimize(
        sc,
        channel,
        alloc,
        power,
        sc.l1_weight if l1 else 0.0,
        streams.activity(),
        callbacks=[FeasibilityCheck()] if check_feasibility else [],
        n_frames=frames,
        checkpoint_every=cfg.checkpoint_every,
        log_every=cfg.log_every,
        show_progress=True,
        channel_rng=redraw_stream(sc, streams) if cfg.redraw_channels else None,
    )
    out_dir = Path(out)
    save_params(out_dir / f"params_{method_slug(method)}.json", alloc, power, channel)
    trace.write_csv(out_dir / f"trace_{method_slug(method)}.csv")
    _report(method, alloc, power, sc, channel)


def reduce_power_cmd(
    params: str,
    scenario: str = "1",
    out: Optional[str] = None,
    threshold: Optional[float] = None,
    config: Optional[str] = None,
    debug: bool = False,
) -> None:
    """Apply power reduction to a saved parameter file.

    Args:
        params: Parameter JSON written by `optimize`.
        scenario: Scenario the parameters belong to.
        out: Output JSON; defaults to `<params>_reduced.json`.
        threshold: Selection probability above which a device counts as using a slot;
            defaults to the config's support_threshold.
        config: Optional experiment YAML; its scenario overrides apply.
        debug: Enable debug logging.
    """
    setup_logging(debug)
    cfg = _config(config)
    _, sc = _scenario(scenario, cfg)
    if threshold is None:
        threshold = cfg.support_threshold
    alloc, power, channel = load_params(params)
    alloc = AllocationMatrix(alloc)
    power = PowerVector(power, power_box(sc, channel), sc.p_max)
    reduced = reduce_power(alloc, power, channel, sc, threshold)

    params_path = Path(params)
    out_path = Path(out) if out is not None else params_path.with_name(f"{params_path.stem}_reduced.json")
    save_params(out_path, alloc, reduced, channel)
    _report("before reduction", alloc, power, sc, channel)
    _report("after reduction", alloc, reduced, sc, channel)


def evaluate_cmd(
    params: str,
    scenario: str = "1",
    mc_frames: int = 0,
    seed: int = 0,
    config: Optional[str] = None,
    debug: bool = False,
) -> None:
    """Exact metrics of a saved parameter file.

    Args:
        params: Parameter JSON.
        scenario: Scenario the parameters belong to.
        mc_frames: If positive, also cross-check with a Monte-Carlo estimate.
        seed: Seed index of the Monte-Carlo stream.
        config: Optional experiment YAML; its scenario overrides apply.
        debug: Enable debug logging.
    """
    setup_logging(debug)
    _, sc = _scenario(scenario, _config(config))
    alloc, power, channel = load_params(params)
    streams = CellStreams.from_seed(sc.seed, seed)
    t_normalized, e_power = evaluate(
        AllocationMatrix(alloc), power, sc, channel, mc_frames, streams.monte_carlo()
    )
    print(f"t_normalized={t_normalized:.10f} expected_power={e_power:.10f}")


def baseline_cmd(
    scenario: str = "1",
    method: str = METHOD_ALOHA,
    seed: int = 0,
    levels: Optional[int] = None,
    out: str = "outputs/baseline",
    config: Optional[str] = None,
    debug: bool = False,
) -> None:
    """Build and evaluate a baseline (aloha_structured or greedy).

    Args:
        scenario: Built-in scenario id (1..4) or a scenario JSON path.
        method: Baseline name.
        seed: Seed index of the run cell; selects the channel.
        levels: Number of structured power levels; defaults to the config's baseline_levels.
        out: Output directory for the params file.
        config: Optional experiment YAML; its scenario overrides apply.
        debug: Enable debug logging.
    """
    setup_logging(debug)
    cfg = _config(config)
    scenario_id, sc = _scenario(scenario, cfg)
    channel = cell_channel(sc, CellStreams.from_seed(sc.seed, seed))
    alloc, power = baseline_parameters(method, sc, channel, levels if levels is not None else cfg.baseline_levels)
    save_params(Path(out) / f"params_{method_slug(method)}.json", alloc, power, channel)
    _report(f"scenario {scenario_id} {method}", alloc, power, sc, channel)


def run_cmd(
    config: Optional[str] = None,
    scenario: Optional[List[str]] = None,
    method: Optional[List[str]] = None,
    seeds: Optional[int] = None,
    frames: Optional[int] = None,
    out: Optional[str] = None,
    workers: Optional[int] = None,
    debug: bool = False,
) -> None:
    """Run the full experiment grid and write results.csv and summary.csv.

    Args:
        config: Experiment YAML; command line flags override it.
        scenario: Scenario ids or JSON paths.
        method: Methods to run.
        seeds: Number of seeds per scenario.
        frames: Frames per optimization run.
        out: Output directory.
        workers: Number of parallel worker processes.
        debug: Enable debug logging.
    """
    setup_logging(debug)
    cfg = _config(config)
    overrides = {}
    if scenario is not None:
        overrides["scenarios"] = scenario
    if method is not None:
        overrides["methods"] = method
    if seeds is not None:
        overrides["n_seeds"] = seeds
    if out is not None:
        overrides["output_dir"] = out
    if workers is not None:
        overrides["workers"] = workers
    if frames is not None:
        overrides["scenario_overrides"] = {**cfg.scenario_overrides, "n_frames": frames}
    cfg.update(**overrides)
    logger.info(f"experiment config: {cfg.as_dict()}")
    records = run_experiment(cfg)
    if not records:
        logger.error("no cell produced results")
        sys.exit(1)


def main() -> None:
    tyro.extras.subcommand_cli_from_dict(
        {
            "optimize": optimize_cmd,
            "reduce-power": reduce_power_cmd,
            "evaluate": evaluate_cmd,
            "baseline": baseline_cmd,
            "run": run_cmd,
        }
    )


if __name__ == "__main__":
    main()
