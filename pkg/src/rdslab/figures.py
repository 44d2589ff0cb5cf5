"""Optional figure rendering for CLI reports.

Each report kind gets one straightforward matplotlib figure written next to
the delimited output.  Figures are a convenience view of numbers already in
the JSON report (or its CSV companion); nothing downstream depends on them.
"""

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, figdir, name):
    os.makedirs(figdir, exist_ok=True)
    out = os.path.join(figdir, name)
    fig.savefig(out, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return out


def _freq_bar(ax, freqs, cis, labels):
    xs = np.arange(len(freqs))
    lo = [f - c[0] for f, c in zip(freqs, cis)]
    hi = [c[1] - f for f, c in zip(freqs, cis)]
    ax.bar(xs, freqs, color="tab:blue", alpha=0.7)
    ax.errorbar(xs, freqs, yerr=[lo, hi], fmt="none", ecolor="black", capsize=3)
    ax.set_xticks(xs, labels)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("frequency")


def render_sync(report, figdir):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    labels = [f"pair {i}" for i in range(len(report.freqs))]
    _freq_bar(ax1, report.freqs, report.cis, labels)
    ax1.set_title(f"final distance < {report.delta:g} at t={report.t_max:g}")
    for i, fp in enumerate(report.first_passage):
        hits = [t for t in fp if t is not None]
        if hits:
            ax2.hist(hits, bins=30, alpha=0.6, label=labels[i])
    ax2.set_xlabel("first passage time")
    ax2.set_ylabel("trials")
    ax2.set_title("synchronization times")
    if len(report.freqs) > 1:
        ax2.legend(fontsize=8)
    return [_save(fig, figdir, "sync.png")]


def render_hit(report, figdir):
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    _freq_bar(ax, [report.freq], [report.ci], [report.op])
    ax.set_title(report.event, fontsize=9)
    name = f"{report.op}.png"
    paths = [_save(fig, figdir, name)]
    times = [t for t in report.extras.get("hit_times", []) if t is not None]
    if times:
        fig, ax = plt.subplots(figsize=(4.5, 3.5))
        ax.hist(times, bins=30, color="tab:green", alpha=0.7)
        ax.set_xlabel("first hit time")
        ax.set_ylabel("trials")
        ax.set_title(f"{report.op}: hit times")
        paths.append(_save(fig, figdir, f"{report.op}_times.png"))
    return paths


def render_lyapunov(report, figdir):
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    means = np.asarray(report.batch_means)
    ax.plot(means, "o-", ms=3, label="batch means")
    ax.axhline(report.lambda_hat, color="black", lw=1, label="estimate")
    ax.axhspan(report.ci[0], report.ci[1], color="tab:orange", alpha=0.25,
               label="95% CI")
    ax.set_xlabel("batch")
    ax.set_ylabel("top exponent")
    ax.set_title(f"lambda = {report.lambda_hat:.4f} (noise: {report.noise_kind})")
    ax.legend(fontsize=8)
    return [_save(fig, figdir, "lyapunov.png")]


def render_gronwall(report, figdir):
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.hist(report.per_pair_worst, bins=30, color="tab:blue", alpha=0.7)
    ax.axvline(1.0, color="red", lw=1, label="bound")
    ax.set_xlabel("worst separation / bound")
    ax.set_ylabel("pairs")
    ax.set_title(f"one-sided growth bound, worst ratio {report.worst_ratio:.4f}")
    ax.legend(fontsize=8)
    return [_save(fig, figdir, "gronwall.png")]


def render_clusters(report, figdir):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    values, tallies = np.unique(report.per_trial_counts, return_counts=True)
    ax1.bar(values, tallies, color="tab:blue", alpha=0.7)
    ax1.set_xlabel("single-linkage component count")
    ax1.set_ylabel("trials")
    title = f"cloud vote: {report.n_hat_cloud}"
    if report.inconclusive:
        title += " (inconclusive)"
    ax1.set_title(title)
    _freq_bar(ax2, [report.diag_mass], [report.diag_ci], ["diag mass"])
    n_diag = "inf" if report.n_hat_diag is None else f"{report.n_hat_diag:.3f}"
    ax2.set_title(f"diagonal mass -> n_hat {n_diag}")
    return [_save(fig, figdir, "clusters.png")]


def render_pullback_cloud(measure, sys, figdir):
    fig, ax = plt.subplots(figsize=(4.5, 4))
    atoms = measure.atoms
    if sys.state_space == "circle":
        ax.hist(atoms[:, 0], bins=60, range=(0, 2 * np.pi), color="tab:blue",
                alpha=0.7)
        ax.set_xlabel("angle")
        ax.set_ylabel("atoms")
    elif sys.dim >= 2:
        ax.plot(atoms[:, 0], atoms[:, 1], ".", ms=3, alpha=0.6)
        ax.set_xlabel("x_1")
        ax.set_ylabel("x_2")
        ax.set_aspect("equal")
    else:
        ax.hist(atoms[:, 0], bins=60, color="tab:blue", alpha=0.7)
        ax.set_xlabel("x")
        ax.set_ylabel("atoms")
    ax.set_title(f"pullback cloud, T={measure.info.get('T')}, m={measure.m}")
    return [_save(fig, figdir, "pullback.png")]


def render_pullback_convergence(rows, figdir):
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ts = [r[0] for r in rows]
    ds = [max(r[1], 1e-18) for r in rows]
    ax.semilogy(ts, ds, "o-")
    ax.set_xlabel("horizon T")
    ax.set_ylabel("energy distance to previous horizon")
    ax.set_title("pullback convergence")
    return [_save(fig, figdir, "pullback.png")]


def render_pullback_many(dists, figdir):
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.hist([max(d, 1e-18) for d in dists],
            bins=np.logspace(-18, 0, 37), color="tab:blue", alpha=0.7)
    ax.set_xscale("log")
    ax.set_xlabel("energy distance between horizons")
    ax.set_ylabel("realizations")
    ax.set_title("pullback convergence across realizations")
    return [_save(fig, figdir, "pullback.png")]


def render_steer(report, figdir):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.8))
    labels = ["from x", "from y"]
    for i, trace in enumerate(report.traces):
        trace = np.asarray(trace)
        if trace.shape[1] >= 2:
            ax1.plot(trace[:, 0], trace[:, 1], "-", lw=1, label=labels[i])
            ax1.plot(trace[0, 0], trace[0, 1], "o", ms=5, color="black")
        else:
            ax1.plot(report.times, trace[:, 0], "-", lw=1, label=labels[i])
    ax1.set_title(f"steered trajectories ({report.kind})")
    ax1.legend(fontsize=8)
    for i, dists in enumerate(report.dist_to_target):
        ax2.semilogy(report.times, [max(v, 1e-18) for v in dists],
                     lw=1, label=labels[i])
    ax2.set_xlabel("t")
    ax2.set_ylabel("distance to target")
    ax2.legend(fontsize=8)
    return [_save(fig, figdir, "steer.png")]


def render_cocycle(report, figdir):
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    labels = [f"({c['s']:g},{c['t']:g})" for c in report.combos]
    devs = [c["max_deviation"] for c in report.combos]
    ax.bar(np.arange(len(devs)), devs, color="tab:blue", alpha=0.7)
    ax.set_xticks(np.arange(len(devs)), labels, rotation=45, fontsize=7)
    ax.set_ylabel("max |composed - direct|")
    ax.set_title(f"composition check, max {report.max_deviation:g}")
    return [_save(fig, figdir, "cocycle.png")]


def render_noise_stats(path, stats, figdir):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    times = np.arange(path.k_lo, path.k_hi + 1) * path.dt
    values = path._grid_values
    for i in range(min(path.d, 4)):
        ax1.plot(times, values[:, i], lw=0.7, label=f"w_{i + 1}")
    ax1.set_xlabel("t")
    ax1.set_title("sampled path")
    ax1.legend(fontsize=8)
    xs = np.arange(path.d)
    ax2.bar(xs - 0.2, stats["mean_z"], width=0.4, label="mean z-score")
    ax2.bar(xs + 0.2, [v - 1.0 for v in stats["var_ratio"]], width=0.4,
            label="variance ratio - 1")
    ax2.axhline(0.0, color="black", lw=0.8)
    ax2.set_xticks(xs, [f"w_{i + 1}" for i in range(path.d)])
    ax2.set_title("increment statistics")
    ax2.legend(fontsize=8)
    return [_save(fig, figdir, "noise_stats.png")]


def render_diag(report, figdir):
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    dists = [max(v, 1e-18) for v in report.final_distances]
    ax.hist(dists, bins=np.logspace(-18, 2, 41), color="tab:blue", alpha=0.7)
    ax.axvline(report.eps, color="red", lw=1, label="eps")
    ax.set_xscale("log")
    ax.set_xlabel("final pair distance")
    ax.set_ylabel("trials")
    ax.set_title(f"diagonal mass {report.diag_mass:.3f}")
    ax.legend(fontsize=8)
    return [_save(fig, figdir, "diag.png")]
