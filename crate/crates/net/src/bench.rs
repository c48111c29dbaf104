//! Loopback timing over a grid of bit widths.

use std::fmt::Write as _;
use std::io;
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use parley_core::mechanism::MechanismParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::config::{NegotiationConfig, NegotiationConfigError, Role};
use crate::session::{run_attacker, run_victim, SessionError, SessionOptions, SessionReport};

/// `(k_θ, k)` cells, in table order.
pub const DEFAULT_GRID: [(u32, u32); 6] = [(8, 8), (8, 16), (8, 32), (16, 8), (16, 16), (16, 32)];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] NegotiationConfigError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("session failed: {0}")]
    Session(#[from] SessionError),
    #[error("parties disagree on the outcome")]
    Disagreement,
    #[error("victim thread panicked")]
    Panicked,
}

/// Runs both parties over a fresh loopback connection, the victim on a
/// second thread.
pub fn run_loopback(
    victim: &NegotiationConfig,
    attacker: &NegotiationConfig,
    victim_options: &SessionOptions,
    attacker_options: &SessionOptions,
) -> io::Result<(SessionReport, SessionReport)> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let (victim, victim_options) = (victim.clone(), victim_options.clone());
    let handle = thread::spawn(move || -> io::Result<SessionReport> {
        let (mut stream, _) = listener.accept()?;
        Ok(run_victim(&mut stream, &victim, &victim_options))
    });
    let attacker_report = match TcpStream::connect(addr) {
        Ok(mut stream) => run_attacker(&mut stream, attacker, attacker_options),
        Err(e) => {
            // Unblock the accept before propagating.
            let _ = TcpStream::connect(addr);
            let _ = handle.join();
            return Err(e);
        }
    };
    let victim_report = handle
        .join()
        .map_err(|_| io::Error::other("victim thread panicked"))??;
    Ok((victim_report, attacker_report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchCell {
    pub k_theta: u32,
    pub k: u32,
    pub median: Duration,
    pub max: Duration,
    pub runs: usize,
}

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2
    }
}

/// Times `runs` honest sessions per cell with random reports. Cells are
/// visited round-robin so that slow drift affects all of them alike. One
/// untimed warm-up session precedes each cell's measurements.
pub fn bench(q: &BigRational, grid: &[(u32, u32)], runs: usize) -> Result<Vec<BenchCell>, BenchError> {
    let mut rng = ChaCha20Rng::from_entropy();
    let mut configs = Vec::with_capacity(grid.len());
    for &(k_theta, k) in grid {
        let params = MechanismParams::from_q(q.clone(), k_theta, k).map_err(NegotiationConfigError::from)?;
        configs.push(params);
    }
    let options = SessionOptions::default();
    let mut timings: Vec<Vec<Duration>> = vec![Vec::with_capacity(runs); grid.len()];
    for round in 0..=runs {
        for (cell, params) in configs.iter().enumerate() {
            let top = 1u64 << params.k_theta();
            let victim = NegotiationConfig::new(Role::Victim, params.clone(), None, rng.gen_range(0..top))?;
            let attacker = NegotiationConfig::new(Role::Attacker, params.clone(), None, rng.gen_range(0..top))?;
            let start = Instant::now();
            let (v, a) = run_loopback(&victim, &attacker, &options, &options)?;
            let elapsed = start.elapsed();
            let (v, a) = (v.result?, a.result?);
            if v.outcome != a.outcome {
                return Err(BenchError::Disagreement);
            }
            if round > 0 {
                timings[cell].push(elapsed);
            }
        }
    }
    Ok(grid
        .iter()
        .zip(timings)
        .map(|(&(k_theta, k), t)| BenchCell {
            k_theta,
            k,
            max: t.iter().copied().max().unwrap_or_default(),
            median: median(t),
            runs,
        })
        .collect())
}

/// Whether the median never decreases when either bit width grows.
pub fn is_monotone(cells: &[BenchCell]) -> bool {
    cells.iter().all(|a| {
        cells
            .iter()
            .filter(|b| a.k_theta <= b.k_theta && a.k <= b.k)
            .all(|b| a.median <= b.median)
    })
}

/// Three columns: `k_θ`, `k`, execution time in milliseconds.
pub fn render_table(cells: &[BenchCell]) -> String {
    let mut out = String::new();
    let rule = "-".repeat(40);
    writeln!(out, "{rule}").unwrap();
    writeln!(out, "{:>8}  {:>8}  {:>18}", "k_theta", "k", "Execution time").unwrap();
    writeln!(out, "{rule}").unwrap();
    for c in cells {
        writeln!(
            out,
            "{:>8}  {:>8}  {:>15.2} ms",
            c.k_theta,
            c.k,
            c.median.as_secs_f64() * 1e3
        )
        .unwrap();
    }
    writeln!(out, "{rule}").unwrap();
    out
}

pub fn write_csv<W: io::Write>(cells: &[BenchCell], w: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["k_theta", "k", "median_ms", "max_ms", "runs"])?;
    for c in cells {
        wtr.write_record([
            c.k_theta.to_string(),
            c.k.to_string(),
            format!("{:.3}", c.median.as_secs_f64() * 1e3),
            format!("{:.3}", c.max.as_secs_f64() * 1e3),
            c.runs.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(k_theta: u32, k: u32, ms: u64) -> BenchCell {
        BenchCell {
            k_theta,
            k,
            median: Duration::from_millis(ms),
            max: Duration::from_millis(ms),
            runs: 1,
        }
    }

    #[test]
    fn monotonicity_uses_the_product_order() {
        let ok = [cell(8, 8, 1), cell(8, 16, 3), cell(16, 8, 2), cell(16, 16, 4)];
        assert!(is_monotone(&ok));
        // (8,16) and (16,8) are incomparable.
        let ok2 = [cell(8, 8, 1), cell(8, 16, 2), cell(16, 8, 3), cell(16, 16, 4)];
        assert!(is_monotone(&ok2));
        let bad = [cell(8, 8, 5), cell(8, 16, 3)];
        assert!(!is_monotone(&bad));
    }

    #[test]
    fn median_of_even_and_odd() {
        let ms = |v: &[u64]| v.iter().map(|&x| Duration::from_millis(x)).collect::<Vec<_>>();
        assert_eq!(median(ms(&[3, 1, 2])), Duration::from_millis(2));
        assert_eq!(median(ms(&[4, 1, 3, 2])), Duration::from_micros(2500));
    }

    #[test]
    fn table_layout() {
        let t = render_table(&[cell(8, 8, 19)]);
        assert!(t.contains("k_theta"));
        assert!(t.contains("19.00 ms"));
    }
}
