"""
darkpath コマンドラインインターフェース

    darkpath analytic|simulate|optimize|sweep <config.json> [--out-dir D] [--threads K]

終了コード: 0 正常, 2 設定エラー, 3 解析的な発散, 4 数値計算の失敗
"""

import argparse
import logging
import sys
import traceback
from typing import List, Optional

import numpy as np
import pandas as pd

from adiabatic_engine import ControlPath
from errors import ConfigError, DarkPathError, DivergentTransferError, InvalidInputError
from experiment_config import COMMANDS, ExperimentConfig, load_config
from lambda_model import (
    HALF_PI,
    LambdaParams,
    analytic_optimal_time,
    applicability_warning,
    closed_form,
    energy_for_time,
    general_prefactor,
    gmax,
    minimal_loss,
    optimal_time_equal_rates,
    optimal_trajectory,
    pap_prefactor,
    potential_theta,
    smooth_boundaries,
    transfer_time,
    weak_coupling_prefactor,
)
from master_equation_sim import (
    FourierPulse,
    PropagationReport,
    propagate_lindblad,
    trajectory_table,
    transfer_report,
)
from optimizer_bench import lambda_sweep, optimize_nested, sweep_tf
from result_writer import ResultWriter, read_csv
from settings import VERSION, configure_logging, settings

logger = logging.getLogger(__name__)

EXIT_OK = 0


def prefactors(p: LambdaParams) -> dict:
    """c と最弱結合で表した c₁（θ̄ > π/4 では2つの量子ビットを入れ替えて評価）"""
    r1, r2 = p.r1, p.r2
    if p.gamma_tot == 0:
        return {"c": None, "c1": None}
    if p.is_pap:
        return {"c": pap_prefactor(r1, r2), "c1": None}
    theta_bar = p.theta_bar
    c = general_prefactor(r1, r2, theta_bar)
    if theta_bar <= np.pi / 4:
        c1 = weak_coupling_prefactor(r1, r2, theta_bar)
    else:
        c1 = weak_coupling_prefactor(r2, r1, HALF_PI - theta_bar)
    return {"c": c, "c1": c1}


def analytic_summary(p: LambdaParams) -> dict:
    """解析的な量のまとめ（cmd_analytic と HTTP API で共有）"""
    delta_f_min = minimal_loss(p)
    summary = {"delta_F_min": delta_f_min, **prefactors(p)}

    closed = closed_form(p)
    summary["closed_form"] = closed
    summary["closed_form_match"] = (
        None if closed is None else bool(abs(closed - delta_f_min) <= 1e-8 * max(abs(delta_f_min), 1e-300))
    )

    summary["divergent"] = False
    summary["t_f_opt"] = None
    if p.kappa_tot > 0:
        try:
            summary["t_f_opt"] = transfer_time(0.0, p)
        except DivergentTransferError as e:
            summary["divergent"] = True
            summary["theta"] = e.theta
    try:
        summary["t_f_equal_rates"] = optimal_time_equal_rates(p)
    except InvalidInputError:
        summary["t_f_equal_rates"] = None
    summary["applicability_warning"] = applicability_warning(p)
    return summary


def cmd_analytic(config: ExperimentConfig, writer: ResultWriter) -> int:
    p = config.require_lambda("analytic")
    theta = np.linspace(0.0, HALF_PI, 181)
    profile = pd.DataFrame({"theta": theta, "V": potential_theta(theta, p), "gmax": gmax(theta, p)})
    writer.write_csv("analytic_profile.csv", profile)

    summary = analytic_summary(p)
    writer.write_json("analytic.json", summary)
    logger.info(f"📊 ΔF_min={summary['delta_F_min']:.10e}, t_f_opt={summary['t_f_opt']}")
    if summary["divergent"] and config.run.require_transfer_time:
        logger.error(f"❌ 最適転送時間が発散します (θ={summary['theta']:.6f})")
        return DivergentTransferError.exit_code
    return EXIT_OK


def _pulse_alpha_from_file(path: str) -> tuple:
    table = read_csv(path)
    if "alpha" not in table.columns:
        raise ConfigError(f"パルスファイルに alpha 列がありません: {path}")
    return tuple(float(a) for a in table["alpha"])


def resolve_path(config: ExperimentConfig, p: LambdaParams):
    """設定の pulse から (ControlPath または FourierPulse, t_f) を組み立てる"""
    spec = config.pulse
    t_f = config.run.t_f
    if spec.kind == "energy_optimal":
        if spec.energy is None:
            if t_f is None:
                raise ConfigError("energy_optimal パルスには pulse.energy か run.t_f が必要です")
            energy = energy_for_time(t_f, p)
        else:
            energy = spec.energy
        solution = optimal_trajectory(energy, p)
        if spec.smooth:
            return smooth_boundaries(solution, spec.smoothing), solution.t_f
        return solution.to_control_path(), solution.t_f

    if t_f is None:
        raise ConfigError(f"{spec.kind} パルスには run.t_f が必要です")
    if spec.kind == "linear":
        return FourierPulse(t_f), t_f
    if spec.kind == "fourier":
        return FourierPulse(t_f, tuple(spec.coefficients)), t_f
    return FourierPulse(t_f, _pulse_alpha_from_file(spec.path)), t_f


def _simulate_generic(config: ExperimentConfig, writer: ResultWriter) -> int:
    spec = config.generic_model
    if config.run.t_f is None:
        raise ConfigError("generic_model の simulate には run.t_f が必要です")
    fam = spec.to_family()
    path = ControlPath.linear(spec.g0, spec.g1, config.run.t_f)
    times = np.linspace(0.0, config.run.t_f, config.run.n_points)
    report = propagate_lindblad(
        fam,
        path,
        np.asarray(spec.initial_state, dtype=complex),
        rtol=config.run.rtol,
        atol=config.run.atol,
        t_eval=times,
        target=None if spec.target is None else np.asarray(spec.target, dtype=complex),
    )
    columns = {"t": times}
    for k in range(fam.dim):
        columns[f"p_{k}"] = np.real(report.states[:, k, k])
    writer.write_csv("trajectory.csv", pd.DataFrame(columns))
    writer.write_json("simulate.json", _report_payload(report, config.run.t_f, config))
    _log_report(report, config.run.t_f)
    return EXIT_OK


def _report_payload(report: PropagationReport, t_f: float, config: ExperimentConfig) -> dict:
    return {
        "t_f": t_f,
        "fidelity": report.fidelity,
        "delta_F": 1.0 - report.fidelity,
        "tolerances": {
            "rtol": settings.rtol if config.run.rtol is None else config.run.rtol,
            "atol": settings.atol if config.run.atol is None else config.run.atol,
        },
        "diagnostics": {
            "trace_drift": report.trace_drift,
            "hermiticity_drift": report.hermiticity_drift,
            "min_eigenvalue": report.min_eigenvalue,
            "n_steps": report.n_steps,
        },
    }


def _log_report(report: PropagationReport, t_f: float) -> None:
    logger.info(f"📊 F={report.fidelity:.10f} (t_f={t_f:.6g})")
    logger.info(
        f"🔍 トレース誤差={report.trace_drift:.2e}, エルミート性誤差={report.hermiticity_drift:.2e}, "
        f"最小固有値={report.min_eigenvalue:.2e}"
    )


def cmd_simulate(config: ExperimentConfig, writer: ResultWriter) -> int:
    if config.generic_model is not None:
        return _simulate_generic(config, writer)
    p = config.require_lambda("simulate")
    applicability_warning(p)
    pulse, t_f = resolve_path(config, p)
    rtol, atol = config.run.rtol, config.run.atol
    table = trajectory_table(p, pulse, config.run.n_points, rtol=rtol, atol=atol)
    writer.write_csv("trajectory.csv", table)

    report = transfer_report(p, pulse, rtol=rtol, atol=atol)
    payload = _report_payload(report, t_f, config)
    payload.update({"pulse": config.pulse.kind, "delta_F_min": minimal_loss(p)})
    writer.write_json("simulate.json", payload)
    _log_report(report, t_f)
    return EXIT_OK


def _optimizer_kwargs(config: ExperimentConfig, threads: Optional[int]) -> dict:
    return {
        "max_evaluations": config.run.max_evaluations,
        "restarts": config.run.restarts,
        "workers": threads,
        "rtol": config.run.rtol,
        "atol": config.run.atol,
    }


def cmd_optimize(config: ExperimentConfig, writer: ResultWriter, threads: Optional[int] = None) -> int:
    p = config.require_lambda("optimize")
    applicability_warning(p)
    t_f = config.run.t_f if config.run.t_f is not None else analytic_optimal_time(p)
    n_values = config.run.n_values or [config.run.n_terms]
    kwargs = _optimizer_kwargs(config, threads)
    if config.run.seeds is not None:
        if len(n_values) != 1:
            raise ConfigError("run.seeds は n_values を1つだけ指定した場合にのみ使えます")
        kwargs["seeds"] = config.run.seeds

    results = optimize_nested(p, t_f, n_values, **kwargs)
    best = results[-1]
    writer.write_json(
        "optimize.json",
        {
            "t_f": t_f,
            "delta_F_min": minimal_loss(p),
            "tolerances": {
                "rtol": settings.objective_rtol if kwargs["rtol"] is None else kwargs["rtol"],
                "atol": settings.objective_atol if kwargs["atol"] is None else kwargs["atol"],
            },
            "results": [r.to_dict() for r in results],
        },
    )
    pulse_table = pd.DataFrame({"n": np.arange(1, best.n_terms + 1), "alpha": best.alpha})
    writer.write_csv("best_pulse.csv", pulse_table)
    if not all(r.converged for r in results):
        logger.warning("⚠️ 収束しなかった最適化があります（converged=false を参照）")
    return EXIT_OK


def cmd_sweep(config: ExperimentConfig, writer: ResultWriter, threads: Optional[int] = None) -> int:
    p = config.require_lambda("sweep")
    applicability_warning(p)
    kwargs = _optimizer_kwargs(config, threads)
    workers = kwargs.pop("workers")

    if config.run.lam_grid is not None:
        stream = writer.open_stream("sweep_lambda.csv")
        lambda_sweep(
            p,
            config.run.lam_grid,
            n_max=config.run.n_max,
            t_f=config.run.t_f,
            t_f_span=config.run.t_f_span,
            workers=workers,
            on_row=stream.append,
            **kwargs,
        )
    elif config.run.t_f_grid is not None:
        stream = writer.open_stream("sweep_tf.csv")
        n_terms = config.run.n_values or config.run.n_terms
        sweep_tf(p, config.run.t_f_grid, n_terms, workers=workers, on_row=stream.append, **kwargs)
    else:
        raise ConfigError("sweep には run.t_f_grid か run.lam_grid が必要です")
    logger.info(f"📁 {stream.rows} 行を書き込みました: {stream.path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="darkpath",
        description="暗状態を経由する量子状態転送の最適化と数値ベンチマーク",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    parser.add_argument("command", choices=COMMANDS, help="実行するコマンド")
    parser.add_argument("config", help="実験設定の JSON ファイル")
    parser.add_argument("--out-dir", default="results", help="出力ディレクトリ")
    parser.add_argument("--threads", type=int, default=None, help="並列プロセス数（既定は DARKPATH_THREADS）")
    parser.add_argument("--log-level", default=None, help="ログレベル（既定は DARKPATH_LOG_LEVEL）")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    threads = args.threads if args.threads is not None else settings.threads
    if threads < 1:
        logger.error("❌ --threads は1以上である必要があります")
        return ConfigError.exit_code

    try:
        config = load_config(args.config)
        if config.command is not None and config.command != args.command:
            raise ConfigError(f"設定ファイルの command={config.command} と引数 {args.command} が一致しません")
        writer = ResultWriter(
            args.out_dir,
            args.command,
            config.model_dump(mode="json"),
            prefix=config.output.prefix,
        )
        logger.info(f"🚀 darkpath {args.command} を開始します (run_id={writer.run_id})")
        if args.command == "analytic":
            code = cmd_analytic(config, writer)
        elif args.command == "simulate":
            code = cmd_simulate(config, writer)
        elif args.command == "optimize":
            code = cmd_optimize(config, writer, threads)
        else:
            code = cmd_sweep(config, writer, threads)
    except DarkPathError as e:
        logger.error(f"❌ {type(e).__name__}: {e.message}")
        if e.details:
            logger.error(f"❌ 詳細: {e.details}")
        return e.exit_code
    except Exception as e:
        logger.error(f"❌ 予期しないエラー: {e}")
        logger.error(traceback.format_exc())
        return 4

    if code == EXIT_OK:
        logger.info(f"✅ 完了しました: {len(writer.written)} ファイル")
    return code


if __name__ == "__main__":
    sys.exit(main())
