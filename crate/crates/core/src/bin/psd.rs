use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use psd_synth::cli::{run, OutputFormat, RunConfig, VerifyLevel, DEFAULT_SAMPLES, EXIT_USAGE};
use psd_synth::covariance::DomainHint;
use psd_synth::fps::{parse_rational, Rational, DEFAULT_ORDER};
use psd_synth::transforms::TransformSpec;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Verify {
    None,
    Identities,
    Oracle,
}

/// Synthesize the power series distribution with a given variance-to-mean
/// covariance V(x).
#[derive(Debug, Parser)]
#[command(name = "psd", version)]
struct Args {
    /// Covariance expression in x, e.g. "x*(1+x^3)" or "x/(1-x)"; "-" reads stdin.
    #[arg(required_unless_present = "preset")]
    expression: Option<String>,
    /// Truncation order (number of coefficients).
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    order: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Shift m: report y^m ω for V(x - m).
    #[arg(long, allow_negative_numbers = true)]
    shift: Option<i64>,
    /// Power k: report ω^k for k V(x/k).
    #[arg(long)]
    power: Option<u32>,
    /// Argument power n: report ω(y^n) for n² V(x/n).
    #[arg(long)]
    argpow: Option<u32>,
    #[arg(long, value_enum, default_value_t = Verify::Identities)]
    verify: Verify,
    /// Monte Carlo sample count for --verify oracle.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated means at which to report moments, e.g. "1/4,1/2".
    #[arg(long, value_delimiter = ',', value_parser = rational_arg)]
    x: Vec<Rational>,
    /// Built-in covariance: sqrt-example for 2(1 - sqrt(1 - x)).
    #[arg(long)]
    preset: Option<String>,
    /// s'(0), the free constant of the quadrature s; c_k scales by its k-th power.
    #[arg(long, value_parser = rational_arg, default_value = "1")]
    s_scale: Rational,
    /// Upper end of the mean domain, or "inf".
    #[arg(long, value_parser = domain_arg)]
    domain: Option<DomainHint>,
}

fn rational_arg(s: &str) -> Result<Rational, String> {
    parse_rational(s.trim()).ok_or_else(|| format!("not a rational number: {s:?}"))
}

fn domain_arg(s: &str) -> Result<DomainHint, String> {
    match s.trim() {
        "inf" => Ok(DomainHint::Unbounded),
        other => rational_arg(other).map(DomainHint::UpTo),
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let transform = if args.shift.is_some() || args.power.is_some() || args.argpow.is_some() {
        match TransformSpec::new(
            args.shift.unwrap_or(0),
            args.power.unwrap_or(1),
            args.argpow.unwrap_or(1),
        ) {
            Ok(t) => Some(t),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_USAGE as u8);
            }
        }
    } else {
        None
    };
    let config = RunConfig {
        expression: args.expression.unwrap_or_default(),
        preset: args.preset,
        order: args.order,
        output_format: match args.format {
            Format::Text => OutputFormat::Text,
            Format::Json => OutputFormat::Json,
        },
        transform,
        verify_level: match args.verify {
            Verify::None => VerifyLevel::None,
            Verify::Identities => VerifyLevel::Identities,
            Verify::Oracle => VerifyLevel::Oracle,
        },
        oracle_samples: args.samples,
        seed: args.seed,
        x_points: args.x,
        s_scale: args.s_scale,
        domain: args.domain,
    };
    let out = run(&config, &mut std::io::stdin().lock());
    let _ = std::io::stdout().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    ExitCode::from(out.exit_code as u8)
}
