//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails.

use std::time::Instant;

use algcf::cfchan::{self, BlockFadingChannel};
use algcf::codec::{
    product_distance, ConstructionALattice, EffectiveNoiseSpec, NestedCodePair, SimConfig, Which,
};
use algcf::numfield::{CoefficientRing, NumberField, RingElement};
use algcf::simkit::{self, dof_slope, paired_difference, Scheme, SweepResult};
use algcf::svp::{self, SearchBasis};
use algcf_cli::config::CliConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

const RINGS: [Scheme; 3] = [Scheme::AmRing(3), Scheme::AmRing(5), Scheme::AmRing(7)];

fn mean_at(res: &SweepResult, s: usize, scheme: Scheme) -> f64 {
    res.row(res.snr_db[s], scheme).unwrap().mean_rate_bits
}

/// `a` beats `b` at SNR index `s` by more than three paired standard errors.
fn strictly_above(res: &SweepResult, s: usize, a: Scheme, b: Scheme) -> (bool, f64) {
    let (diff, se) = paired_difference(res.trial_rates(s, a).unwrap(), res.trial_rates(s, b).unwrap());
    let z = if se > 0.0 { diff / se } else if diff > 0.0 { f64::INFINITY } else { 0.0 };
    (z > 3.0, z)
}

fn fig_ordering(res: &SweepResult, elapsed: f64) -> Verdict {
    let mut failures = Vec::new();
    let mut min_z = f64::INFINITY;
    for s in 0..res.snr_db.len() {
        let db = res.snr_db[s];
        if db < 30.0 {
            continue;
        }
        let golden = mean_at(res, s, Scheme::AmRing(5));
        for other in [Scheme::AmRing(3), Scheme::AmRing(7)] {
            if golden < mean_at(res, s, other) {
                failures.push(format!("{db} dB: am_ring(5) < {other}"));
            }
        }
        let mut strict: Vec<(Scheme, Scheme)> = RINGS.iter().map(|&r| (r, Scheme::NaiveZ)).collect();
        strict.push((Scheme::NaiveZ, Scheme::AmZ));
        for other in [Scheme::NaiveZ, Scheme::AmZ].into_iter().chain(RINGS) {
            strict.push((Scheme::Mac, other));
        }
        for (a, b) in strict {
            let (ok, z) = strictly_above(res, s, a, b);
            min_z = min_z.min(z);
            if !ok {
                failures.push(format!("{db} dB: {a} > {b} only {z:.2} SE"));
            }
        }
    }
    if elapsed > 300.0 {
        failures.push(format!("sweep took {elapsed:.1} s"));
    }
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!("all orderings hold at 30-50 dB, smallest margin {min_z:.1} paired SE, sweep {elapsed:.1} s")
        } else {
            failures.join("; ")
        },
    )
}

fn dof_slopes(res: &SweepResult) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for &scheme in &res.schemes {
        let slope = dof_slope(res, scheme, (30.0, 50.0)).unwrap();
        let good = match scheme {
            Scheme::Mac => (1.8..=2.2).contains(&slope),
            Scheme::AmRing(_) => (0.8..=1.2).contains(&slope),
            Scheme::NaiveZ => (0.35..=0.65).contains(&slope),
            Scheme::AmZ => slope <= 0.25,
        };
        ok &= good;
        parts.push(format!("{scheme}={slope:.3}{}", if good { "" } else { "(!)" }));
    }
    verdict(ok, parts.join(" "))
}

fn exact_dominance(res: &SweepResult) -> Verdict {
    let z = res.scheme_index(Scheme::AmZ).unwrap();
    let mut checked = 0usize;
    let mut violations = 0usize;
    for s in 0..res.snr_db.len() {
        for ring in RINGS {
            let k = res.scheme_index(ring).unwrap();
            for (r, zr) in res.per_trial[s][k].iter().zip(&res.per_trial[s][z]) {
                checked += 1;
                if r < zr {
                    violations += 1;
                }
            }
        }
    }
    verdict(violations == 0, format!("{violations} violations in {checked} (trial, SNR, ring) triples"))
}

fn random_channel(rng: &mut ChaCha8Rng, snr: f64) -> BlockFadingChannel {
    let mut h = [0.0; 4];
    algcf::rng::fill_standard_normal(rng, &mut h);
    BlockFadingChannel::new(vec![h[..2].to_vec(), h[2..].to_vec()], snr).unwrap()
}

fn svp_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let rings = [
        CoefficientRing::Integers,
        CoefficientRing::quadratic(3).unwrap(),
        CoefficientRing::quadratic(5).unwrap(),
        CoefficientRing::quadratic(7).unwrap(),
    ];
    let (mut compared, mut boundary, mut mismatches, mut minkowski_fail) = (0, 0, 0, 0);
    let mut outside_box = 0;
    for _ in 0..200 {
        let snr = 10f64.powf(rng.gen_range(0.0..4.0));
        let ch = random_channel(&mut rng, snr);
        for ring in &rings {
            let basis = SearchBasis::build(ring, &ch).unwrap();
            let sd = svp::shortest_vector(&basis).unwrap();
            let bf = svp::brute_force_shortest(&basis, 6).unwrap();
            if sd.norm_sq.sqrt() >= basis.minkowski_bound() {
                minkowski_fail += 1;
            }
            // The sphere decoder may never lose to any box.
            if sd.norm_sq > bf.norm_sq * (1.0 + 1e-9) {
                mismatches += 1;
                continue;
            }
            if bf.coords.iter().any(|c| c.abs() == 6) {
                boundary += 1;
                continue;
            }
            compared += 1;
            let reach = sd.coords.iter().map(|c| c.abs()).max().unwrap();
            let oracle = if reach <= 6 {
                bf
            } else {
                // An interior box minimizer need not be global: the SVP
                // minimizer lies outside the box, so widen the box to reach it.
                outside_box += 1;
                svp::brute_force_shortest(&basis, reach + 1).unwrap()
            };
            if (sd.norm_sq - oracle.norm_sq).abs() > 1e-9 * oracle.norm_sq {
                mismatches += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        mismatches == 0 && minkowski_fail == 0 && secs < 30.0,
        format!(
            "200 channels x 4 rings: {compared} interior comparisons ({outside_box} with the minimizer outside \
             the 6-box, checked on a widened box), {mismatches} mismatches, {boundary} boundary minimizers, \
             {minkowski_fail} Minkowski violations, {secs:.1} s"
        ),
    )
}

fn random_small(rng: &mut ChaCha8Rng, bound: i64) -> RingElement {
    RingElement::new(rng.gen_range(-bound..=bound), rng.gen_range(-bound..=bound))
}

fn closure() -> Verdict {
    let k5 = NumberField::quadratic(5).unwrap();
    let k3 = NumberField::quadratic(3).unwrap();
    let setups = [(k5, 11, 2, 1, 0), (k5, 11, 3, 2, 1), (k5, 3, 3, 2, 1), (k3, 13, 3, 2, 1)];
    let lattices: Vec<ConstructionALattice> = setups
        .iter()
        .map(|&(k, p, t, lf, lc)| {
            let prime = k.prime_above(p).unwrap();
            let codes = NestedCodePair::reed_solomon(prime.residue_field(), t, lf, lc).unwrap();
            ConstructionALattice::build(&k, &prime, codes, 10.0).unwrap()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut fine_fail, mut coarse_fail, mut label_fail) = (0, 0, 0);
    for trial in 0..1000 {
        let lat = &lattices[trial % lattices.len()];
        let k = *lat.field();
        let prime = *lat.prime();
        let f = *lat.residue_field();
        let users = rng.gen_range(2..=4);
        let mut messages = Vec::new();
        let mut points = Vec::new();
        for _ in 0..users {
            let w: Vec<_> = (0..lat.codes().message_dim())
                .map(|_| f.from_index(rng.gen_range(0..f.order())))
                .collect();
            let tx = lat.encode::<ChaCha8Rng>(&w, None);
            // Shift by a random element of 𝔭^T to leave the shaping region.
            let [b1, b2] = prime.z_basis();
            let point: Vec<RingElement> = tx
                .point
                .iter()
                .map(|&x| {
                    let (c1, c2) = (rng.gen_range(-3..=3), rng.gen_range(-3..=3));
                    x + b1.checked_scale(c1).unwrap() + b2.checked_scale(c2).unwrap()
                })
                .collect();
            points.push(lat.embed_point(&point));
            messages.push(w);
        }
        let a: Vec<RingElement> = (0..users).map(|_| random_small(&mut rng, 4)).collect();
        let combined = lat.ring_combine(&a, &points);
        if !lat.is_member(Which::Fine, &combined) {
            fine_fail += 1;
        }
        if lat.map_message(&combined) != Some(lat.equation_message(&a, &messages)) {
            label_fail += 1;
        }
        let in_p: Vec<RingElement> = (0..users)
            .map(|_| {
                let r = random_small(&mut rng, 3);
                k.mul(r, prime.z_basis()[rng.gen_range(0..2)]).unwrap()
            })
            .collect();
        if !lat.is_member(Which::Coarse, &lat.ring_combine(&in_p, &points)) {
            coarse_fail += 1;
        }
    }
    verdict(
        fine_fail + coarse_fail + label_fail == 0,
        format!(
            "1000 combinations over 4 lattices: {fine_fail} fine, {coarse_fail} coarse, {label_fail} label failures"
        ),
    )
}

fn golden_codec(power: f64) -> ConstructionALattice {
    let k = NumberField::quadratic(5).unwrap();
    let prime = k.prime_above(11).unwrap();
    let codes = NestedCodePair::reed_solomon(prime.residue_field(), 2, 1, 0).unwrap();
    ConstructionALattice::build(&k, &prime, codes, power).unwrap()
}

fn volume_and_rate() -> Verdict {
    let lat = golden_codec(1.0);
    let vol = lat.volume(Which::Fine);
    let rate = lat.message_rate_bits();
    let vol_ok = (vol - 55.0).abs() <= 1e-6 * 55.0;
    let rate_ok = rate == 0.5 * 11f64.log2();
    verdict(vol_ok && rate_ok, format!("Gram volume {vol:.9}, message rate {rate:.12} bits"))
}

fn union_bound_validity() -> Verdict {
    let h = simkit::sample_channels(1, 0, 2, 2);
    let ring = CoefficientRing::quadratic(5).unwrap();
    let mut used = Vec::new();
    let mut failures = Vec::new();
    let mut db = 0.0;
    while db <= 20.0 {
        let ch = BlockFadingChannel::from_snr_db(h.clone(), db).unwrap();
        let lat = golden_codec(ch.snr());
        let cand = svp::best_equation(&ring, &ch).unwrap();
        let mut outcome = None;
        for trials in [10_000u64, 100_000] {
            let o = lat.simulate(&ch, &cand, &SimConfig::new(trials, 1)).unwrap();
            if o.errors >= 50 {
                outcome = Some(o);
                break;
            }
        }
        if let Some(o) = outcome {
            let ub = lat
                .union_bound_min_terms(&EffectiveNoiseSpec::from_candidate(&cand), 1000)
                .unwrap();
            if o.error_rate > ub.value + 3.0 * o.stderr {
                failures.push(format!("{db} dB: {:.3e} > {:.3e}", o.error_rate, ub.value));
            }
            used.push(format!("{db}dB {:.2e}<={:.2e}({} terms)", o.error_rate, ub.value, ub.terms));
        }
        db += 2.0;
    }
    verdict(
        failures.is_empty() && !used.is_empty(),
        if failures.is_empty() {
            used.join(", ")
        } else {
            failures.join("; ")
        },
    )
}

fn product_distance_bound() -> Verdict {
    let k5 = NumberField::quadratic(5).unwrap();
    let k2 = NumberField::quadratic(2).unwrap();
    let setups = [(k5, 11, 2, 1, 0), (k5, 11, 3, 2, 1), (k2, 7, 2, 1, 0), (k5, 3, 2, 1, 0)];
    let (mut checked, mut violations) = (0usize, 0usize);
    for (k, p, t, lf, lc) in setups {
        let prime = k.prime_above(p).unwrap();
        let codes = NestedCodePair::reed_solomon(prime.residue_field(), t, lf, lc).unwrap();
        let lat = ConstructionALattice::build(&k, &prime, codes, 25.0).unwrap();
        let g2 = lat.gamma() * lat.gamma();
        let bound = g2.powi(2) * (t as f64).powi(2);
        let radius = lat.shortest_fine_norm() * 4.0;
        for pt in lat.enumerate_fine_points(radius) {
            if pt.coords.iter().any(RingElement::is_zero) {
                continue;
            }
            checked += 1;
            if product_distance(&pt.embedded, 2, t) < bound * (1.0 - 1e-9) {
                violations += 1;
            }
        }
    }
    verdict(
        violations == 0 && checked > 0,
        format!("{checked} fine vectors with all coordinates nonzero, {violations} violations"),
    )
}

fn numerical_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rings = [
        CoefficientRing::Integers,
        CoefficientRing::quadratic(2).unwrap(),
        CoefficientRing::quadratic(5).unwrap(),
        CoefficientRing::quadratic(7).unwrap(),
    ];
    let (mut amgm_fail, mut stationarity_fail, mut rate_fail, mut rate_checked) = (0, 0, 0, 0);
    let mut worst_derivative: f64 = 0.0;
    for i in 0..1000 {
        let snr = 10f64.powf(rng.gen_range(0.0..4.0));
        let ch = random_channel(&mut rng, snr);
        let ring = &rings[i % rings.len()];
        let a: Vec<RingElement> = loop {
            let a: Vec<RingElement> = (0..2)
                .map(|_| {
                    let e = random_small(&mut rng, 4);
                    if ring.rank() == 1 { RingElement::integer(e.u) } else { e }
                })
                .collect();
            if a.iter().any(|x| !x.is_zero()) {
                break a;
            }
        };
        let cand = cfchan::am_rate(&ch, &a, ring).unwrap();
        if cand.sigma_am_sq() < cand.sigma_gm_sq() * (1.0 - 1e-12) {
            amgm_fail += 1;
        }
        for j in 0..2 {
            let h = ch.gains(j);
            // ν² is quadratic in b, so a central difference is exact up to rounding.
            let eps = 1e-2 * (1.0 + cand.b[j].abs());
            let up = cfchan::effective_noise(h, &cand.sigma[j], cand.b[j] + eps, snr);
            let down = cfchan::effective_noise(h, &cand.sigma[j], cand.b[j] - eps, snr);
            let derivative = ((up - down) / (2.0 * eps)).abs();
            worst_derivative = worst_derivative.max(derivative);
            if derivative >= 1e-6 {
                stationarity_fail += 1;
            }
        }
        // (n/2) log(P / σ²_AM) against (n/2) log(n / f(a)), before clipping at zero,
        // and the clipped rate against the candidate's reported rate.
        let from_noise = (snr / cand.sigma_am_sq()).log2();
        let from_form = (2.0 / cand.quad_form).log2();
        rate_checked += 1;
        if (from_noise - from_form).abs() > 1e-9 * from_form.abs().max(1.0)
            || (from_noise.max(0.0) - cand.rate_bits).abs() > 1e-9 * cand.rate_bits.max(1.0)
        {
            rate_fail += 1;
        }
    }
    verdict(
        amgm_fail + stationarity_fail + rate_fail == 0,
        format!(
            "1000 instances: {amgm_fail} AM-GM, {stationarity_fail} stationarity (max |dν²/db| {worst_derivative:.2e}), \
             {rate_fail}/{rate_checked} rate-identity failures"
        ),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4", "0"] {
        let path = dir.path().join(format!("sweep_{threads}.csv"));
        let args = ["algcf", "--threads", threads, "sweep", "--output", path.to_str().unwrap()];
        let code = algcf_cli::run_with(args, &mut std::io::sink(), &mut std::io::sink());
        if code != 0 {
            return verdict(false, format!("sweep with {threads} threads exited {code}"));
        }
        outputs.push(std::fs::read(&path).unwrap());
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    verdict(
        same,
        format!("3 default sweeps (threads 1, 4, auto), {} bytes each, identical: {same}", outputs[0].len()),
    )
}

fn main() {
    let cfg = CliConfig::default().sweep_config(0);
    let start = Instant::now();
    let sweep = simkit::run_sweep(&cfg).expect("default sweep");
    let elapsed = start.elapsed().as_secs_f64();
    assert_eq!(sweep.channel_draws, cfg.trials, "one channel draw per trial");

    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("rate ordering at 30-50 dB", Box::new(|| fig_ordering(&sweep, elapsed))),
        ("DOF slopes over 30-50 dB", Box::new(|| dof_slopes(&sweep))),
        ("per-trial ring >= Z-AM dominance", Box::new(|| exact_dominance(&sweep))),
        ("SVP against brute force and Minkowski", Box::new(svp_oracle)),
        ("lattice closure under ring combinations", Box::new(closure)),
        ("Construction A volume and message rate", Box::new(volume_and_rate)),
        ("error rate below truncated union bound", Box::new(union_bound_validity)),
        ("product-distance lower bound", Box::new(product_distance_bound)),
        ("AM-GM, MMSE stationarity, rate identity", Box::new(numerical_identities)),
        ("CSV determinism across thread counts", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {} ({})",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            name,
            v.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
