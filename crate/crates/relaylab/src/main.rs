//! Command-line front end: optimal-pairing reports, numerical verification
//! suites, and Monte-Carlo sweeps with CSV output.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or config error,
//! 3 I/O failure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use relaylab::channel::{
    derive_relay_gain, generate_channel, pairing_metrics, ChannelRealization, Geometry,
};
use relaylab::config::CliConfig;
use relaylab::error::Error;
use relaylab::experiments::{
    power_from_snr, run_position_sweep, run_snr_sweep, substream_seed,
};
use relaylab::pairing::{
    assignment_pairing, brute_force_pairing, sorted_pairing, DEFAULT_ENUMERATION_LIMIT,
};
use relaylab::rate::rate_pairing;
use relaylab::unitary::{ascend_rate, directional_derivative, haar_random, GramMatrix};

#[derive(Parser)]
#[command(
    name = "relaylab",
    version,
    about = "Achievable-rate analysis and optimal subcarrier pairing for AF OFDM relays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report the optimal pairing for one channel as a table plus JSON.
    Pair(PairArgs),
    /// Run a numerical verification suite.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Run a Monte-Carlo sweep and write CSV.
    #[command(subcommand)]
    Sweep(SweepCommand),
}

#[derive(Args)]
struct PairArgs {
    /// JSON config path.
    #[arg(long)]
    config: PathBuf,
    /// Force direct-path reception (otherwise taken from the config).
    #[arg(long)]
    direct: bool,
    /// Write the JSON result here; overrides `output` in the config. When
    /// neither is set the JSON is printed after the table.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Sorted pairing equals the exhaustive and assignment oracles.
    Lemma(LemmaArgs),
    /// Unitary ascent never beats sorted pairing, which is stationary.
    Theorem(TheoremArgs),
    /// Principal-minor determinant bound on random Gram matrices.
    Bound(BoundArgs),
}

#[derive(Args)]
struct LemmaArgs {
    /// Subcarrier count (capped by the enumeration oracle).
    #[arg(long, default_value_t = 6)]
    n: usize,
    /// Random channels to test.
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Master seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Relative rate tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Use this exact channel seed (requires --trials 1); printed by
    /// failure reports for replay.
    #[arg(long)]
    raw_trial_seed: Option<u64>,
}

#[derive(Args)]
struct TheoremArgs {
    /// Subcarrier count.
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Random channels to test.
    #[arg(long, default_value_t = 50)]
    trials: usize,
    /// Haar restarts per channel.
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    /// Master seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Reachability tolerance for the best restart (default 1e-4 for n=2,
    /// 1e-3 otherwise).
    #[arg(long)]
    tol: Option<f64>,
    /// Use this exact channel seed (requires --trials 1).
    #[arg(long)]
    raw_trial_seed: Option<u64>,
}

#[derive(Args)]
struct BoundArgs {
    /// Largest Gram dimension (sizes cycle 1..=n).
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Random Gram matrices to test.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Master seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Subcommand)]
enum SweepCommand {
    /// Rate versus SNR.
    Snr(SweepArgs),
    /// Rate versus relay position ratio d_sr/d_rd.
    Position(SweepArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// JSON config path.
    #[arg(long)]
    config: PathBuf,
    /// CSV output path; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the SNR axis (comma-separated dB values).
    #[arg(long, value_delimiter = ',')]
    snr_db: Option<Vec<f64>>,
    /// Override the position axis (comma-separated ratios).
    #[arg(long, value_delimiter = ',')]
    ratio: Option<Vec<f64>>,
}

fn main() -> ExitCode {
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Pair(args) => cmd_pair(args),
        Command::Verify(VerifyCommand::Lemma(args)) => cmd_verify_lemma(args),
        Command::Verify(VerifyCommand::Theorem(args)) => cmd_verify_theorem(args),
        Command::Verify(VerifyCommand::Bound(args)) => cmd_verify_bound(args),
        Command::Sweep(SweepCommand::Snr(args)) => cmd_sweep(args, SweepAxis::Snr),
        Command::Sweep(SweepCommand::Position(args)) => cmd_sweep(args, SweepAxis::Position),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Io(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

/// RELAYLAB_THREADS caps the rayon worker count; default is machine
/// parallelism.
fn configure_threads() -> Result<(), String> {
    match std::env::var("RELAYLAB_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => {
            let count: usize = raw
                .parse()
                .map_err(|_| format!("RELAYLAB_THREADS must be a positive integer, got `{raw}`"))?;
            if count == 0 {
                return Err("RELAYLAB_THREADS must be at least 1".into());
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(count)
                .build_global()
                .map_err(|e| format!("failed to configure thread pool: {e}"))
        }
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// FNV-1a over the bit patterns of all channel gains, used to identify a
/// realization in failure reports.
fn channel_digest(chan: &ChannelRealization) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for z in chan.h0.iter().chain(&chan.h1).chain(&chan.h2) {
        for v in [z.re, z.im] {
            for byte in v.to_bits().to_le_bytes() {
                h = (h ^ byte as u64).wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }
    h
}

fn cmd_pair(args: PairArgs) -> relaylab::Result<ExitCode> {
    let config = CliConfig::load(&args.config)?;
    let direct = args.direct || config.direct_path;
    let params = config.system_params(direct)?;
    let channel = match config.channel()? {
        Some(chan) => {
            if chan.n_subcarriers() != params.n_subcarriers() {
                return Err(Error::DimensionMismatch(
                    "channel_override does not match n_subcarriers".into(),
                ));
            }
            chan
        }
        None => {
            let geometry = config.geometry()?;
            let mut rng =
                ChaCha8Rng::seed_from_u64(substream_seed(config.master_seed, 0, 0));
            generate_channel(&geometry, &params, &mut rng)?
        }
    };
    let d_r = derive_relay_gain(&params, &channel.h1);
    let metrics = pairing_metrics(&params, &channel, d_r);
    let perm = sorted_pairing(&metrics, direct);
    let breakdown = rate_pairing(&perm, &metrics, direct)?;

    let map_one_based: Vec<usize> = perm.map().iter().map(|&j| j + 1).collect();
    println!("optimal subcarrier pairing (direct path: {direct})");
    println!("map = {map_one_based:?}");
    println!("{:>6} {:>7} {:>14} {:>12}", "input", "output", "sinr", "bits");
    for pair in &breakdown.per_pair {
        println!(
            "{:>6} {:>7} {:>14.6} {:>12.6}",
            pair.input + 1,
            pair.output + 1,
            pair.sinr,
            pair.bits
        );
    }
    println!(
        "total: {:.6} bits/use, per subcarrier: {:.6}",
        breakdown.total_bits,
        breakdown.per_subcarrier()
    );

    let json = serde_json::json!({
        "schema_version": relaylab::config::SCHEMA_VERSION,
        "direct": direct,
        "map": map_one_based,
        "pairs": breakdown.per_pair.iter().map(|p| {
            serde_json::json!({
                "input": p.input + 1,
                "output": p.output + 1,
                "sinr": p.sinr,
                "bits": p.bits,
            })
        }).collect::<Vec<_>>(),
        "total_bits": breakdown.total_bits,
        "rate_per_subcarrier": breakdown.per_subcarrier(),
    });
    let rendered = serde_json::to_string_pretty(&json).expect("json rendering cannot fail");
    match args.out.or_else(|| config.output.clone()) {
        Some(path) => {
            std::fs::write(&path, rendered.as_bytes())?;
            println!("wrote {}", path.display());
        }
        None => println!("{rendered}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn trial_seed(master: u64, lane: u64, trial: usize, raw: Option<u64>) -> u64 {
    match raw {
        Some(seed) => seed,
        None => substream_seed(master, lane, trial as u64),
    }
}

fn cmd_verify_lemma(args: LemmaArgs) -> relaylab::Result<ExitCode> {
    if args.n == 0 || args.n > DEFAULT_ENUMERATION_LIMIT {
        return Err(Error::SizeLimit {
            n: args.n,
            limit: DEFAULT_ENUMERATION_LIMIT,
        });
    }
    if args.raw_trial_seed.is_some() && args.trials != 1 {
        return Err(Error::InvalidParams(
            "--raw-trial-seed requires --trials 1".into(),
        ));
    }
    let taps = args.n.min(11);
    let geometry = Geometry::new(20.0, 6.0, 16.0, 2.0, taps)?;
    let mut checks = 0usize;
    let mut failures = 0usize;
    for t in 0..args.trials {
        let seed = trial_seed(args.seed, args.n as u64, t, args.raw_trial_seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let snr_db: f64 = rng.random_range(0.0..20.0);
        let params = power_from_snr(snr_db, &geometry, args.n);
        let channel = generate_channel(&geometry, &params, &mut rng)?;
        let d_r = derive_relay_gain(&params, &channel.h1);
        let metrics = pairing_metrics(&params, &channel, d_r);
        for direct in [false, true] {
            checks += 1;
            let sorted_rate = rate_pairing(&sorted_pairing(&metrics, direct), &metrics, direct)?
                .total_bits;
            let (_, brute_rate) =
                brute_force_pairing(&metrics, direct, DEFAULT_ENUMERATION_LIMIT)?;
            let assigned_rate =
                rate_pairing(&assignment_pairing(&metrics, direct), &metrics, direct)?
                    .total_bits;
            let ok = rel_close(sorted_rate, brute_rate, args.tol)
                && rel_close(assigned_rate, brute_rate, args.tol);
            if !ok {
                failures += 1;
                eprintln!(
                    "FAIL lemma n={} direct={direct} trial={t} seed={seed:#018x} digest={:#018x}",
                    args.n,
                    channel_digest(&channel)
                );
                eprintln!(
                    "  sorted={sorted_rate:.15} brute={brute_rate:.15} assignment={assigned_rate:.15}"
                );
                eprintln!(
                    "  replay: relaylab verify lemma --n {} --trials 1 --raw-trial-seed {seed}",
                    args.n
                );
            }
        }
    }
    println!(
        "lemma: {}/{} checks passed (n={}, trials={}, both direct settings)",
        checks - failures,
        checks,
        args.n,
        args.trials
    );
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_verify_theorem(args: TheoremArgs) -> relaylab::Result<ExitCode> {
    if args.n < 2 {
        return Err(Error::InvalidParams(
            "theorem verification needs n >= 2".into(),
        ));
    }
    if args.raw_trial_seed.is_some() && args.trials != 1 {
        return Err(Error::InvalidParams(
            "--raw-trial-seed requires --trials 1".into(),
        ));
    }
    let reach_tol = args.tol.unwrap_or(if args.n == 2 { 1e-4 } else { 1e-3 });
    let taps = args.n.min(11);
    let geometry = Geometry::new(20.0, 6.0, 16.0, 2.0, taps)?;
    let mut checks = 0usize;
    let mut failures = 0usize;
    for t in 0..args.trials {
        let seed = trial_seed(args.seed, 1000 + args.n as u64, t, args.raw_trial_seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let snr_db: f64 = rng.random_range(0.0..20.0);
        let base_params = power_from_snr(snr_db, &geometry, args.n);
        let channel = generate_channel(&geometry, &base_params, &mut rng)?;
        let d_r = derive_relay_gain(&base_params, &channel.h1);
        let metrics = pairing_metrics(&base_params, &channel, d_r);
        for direct in [false, true] {
            let params = base_params.clone().with_direct_path(direct);
            let best_perm = sorted_pairing(&metrics, direct);
            let target = rate_pairing(&best_perm, &metrics, direct)?.total_bits;

            let restart_rates: Vec<f64> = (0..args.restarts)
                .into_par_iter()
                .map(|r| {
                    let restart_seed = substream_seed(seed, 2 + direct as u64, r as u64);
                    let mut restart_rng = ChaCha8Rng::seed_from_u64(restart_seed);
                    let start = haar_random(args.n, &mut restart_rng);
                    ascend_rate(&params, &channel, &start, 40, 1e-7).map(|out| out.rate)
                })
                .collect::<relaylab::Result<Vec<f64>>>()?;
            let max_rate = restart_rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

            checks += 1;
            if restart_rates.iter().any(|&r| r > target + 1e-6) {
                failures += 1;
                report_theorem_failure("ascent exceeded the pairing optimum", &args, t, seed, &channel, target, max_rate);
            }
            checks += 1;
            if max_rate < target - reach_tol {
                failures += 1;
                report_theorem_failure("best restart fell short of the optimum", &args, t, seed, &channel, target, max_rate);
            }

            checks += 1;
            let mut dir_rng =
                ChaCha8Rng::seed_from_u64(substream_seed(seed, 4 + direct as u64, 0));
            let w_star = best_perm.to_unitary();
            let mut max_slope = 0.0f64;
            for _ in 0..20 {
                let s = random_skew(args.n, &mut dir_rng);
                let slope = directional_derivative(&w_star, &s, &params, &channel, 1e-4)?;
                max_slope = max_slope.max(slope.abs());
            }
            if max_slope > 1e-6 * (1.0 + target.abs()) {
                failures += 1;
                report_theorem_failure("optimum is not stationary", &args, t, seed, &channel, target, max_slope);
            }
        }
    }
    println!(
        "theorem: {}/{} checks passed (n={}, trials={}, restarts={}, reach tol={reach_tol:.1e})",
        checks - failures,
        checks,
        args.n,
        args.trials,
        args.restarts
    );
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn report_theorem_failure(
    what: &str,
    args: &TheoremArgs,
    trial: usize,
    seed: u64,
    channel: &ChannelRealization,
    target: f64,
    observed: f64,
) {
    eprintln!(
        "FAIL theorem ({what}) n={} trial={trial} seed={seed:#018x} digest={:#018x}",
        args.n,
        channel_digest(channel)
    );
    eprintln!("  pairing optimum={target:.15} observed={observed:.15}");
    eprintln!(
        "  replay: relaylab verify theorem --n {} --trials 1 --restarts {} --raw-trial-seed {seed}",
        args.n, args.restarts
    );
}

fn random_skew(n: usize, rng: &mut ChaCha8Rng) -> nalgebra::DMatrix<num_complex::Complex64> {
    use rand_distr::StandardNormal;
    let z = nalgebra::DMatrix::from_fn(n, n, |_, _| {
        num_complex::Complex64::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        )
    });
    let mut s = (&z - z.adjoint()) * num_complex::Complex64::new(0.5, 0.0);
    let norm: f64 = s.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        s /= num_complex::Complex64::new(norm, 0.0);
    }
    s
}

fn cmd_verify_bound(args: BoundArgs) -> relaylab::Result<ExitCode> {
    use rand_distr::StandardNormal;
    if args.n == 0 {
        return Err(Error::InvalidParams("--n must be at least 1".into()));
    }
    let mut failures = 0usize;
    for t in 0..args.trials {
        let seed = substream_seed(args.seed, 7, t as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 1 + t % args.n;
        let diag = |rng: &mut ChaCha8Rng| -> Vec<num_complex::Complex64> {
            (0..dim)
                .map(|_| {
                    num_complex::Complex64::new(
                        rng.sample::<f64, _>(StandardNormal),
                        rng.sample::<f64, _>(StandardNormal),
                    )
                })
                .collect()
        };
        let p = diag(&mut rng);
        let q = diag(&mut rng);
        let w = haar_random(dim, &mut rng);
        let gram = GramMatrix::from_factors(&p, &w, &q)?;
        if !relaylab::unitary::psd_det_bound_check(&gram) {
            failures += 1;
            eprintln!("FAIL bound trial={t} dim={dim} seed={seed:#018x}");
        }
    }
    println!(
        "bound: {}/{} checks passed (dims 1..={}, trials={})",
        args.trials - failures,
        args.trials,
        args.n,
        args.trials
    );
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

enum SweepAxis {
    Snr,
    Position,
}

fn cmd_sweep(args: SweepArgs, axis: SweepAxis) -> relaylab::Result<ExitCode> {
    let config = CliConfig::load(&args.config)?;
    let mut scenario = config.to_scenario()?;
    if let Some(seed) = args.seed {
        scenario.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        scenario.trials = trials;
    }
    if let Some(list) = args.snr_db {
        scenario.snr_db_list = list;
    }
    if let Some(list) = args.ratio {
        scenario.position_ratio_list = list;
    }
    let result = match axis {
        SweepAxis::Snr => run_snr_sweep(&scenario)?,
        SweepAxis::Position => run_position_sweep(&scenario)?,
    };
    let out_path = args.out.or_else(|| config.output.clone()).ok_or_else(|| {
        Error::InvalidParams("no output path: pass --out or set `output` in the config".into())
    })?;
    let file = File::create(&out_path)?;
    let mut writer = BufWriter::new(file);
    relaylab::report::write_csv(&result, &mut writer)?;
    writer.flush()?;
    println!("wrote {} rows to {}", result.rows.len(), out_path.display());
    Ok(ExitCode::SUCCESS)
}
