//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p framepack-core --test acceptance -- --nocapture`.
//! The test fails for any red criterion not listed in `KNOWN_RED`, and for
//! any listed one that starts passing.

use std::time::{Duration, Instant};

use framepack_core::codebook::{Codebook, FitConfig};
use framepack_core::container::{read_video, write_video, FpltFile};
use framepack_core::eval::drift::{builtin_metrics, drift, window_len};
use framepack_core::eval::elo::{elo_update, rank_ratings, MatchRecord, Outcome, RatingTable, TIE_MARGIN};
use framepack_core::importance::{sim_cos, sim_time, sort_by_importance, ImportanceOptions};
use framepack_core::ledger::{
    decompose_rate, length_bound, tokens_for_schedule, total_length, total_length_exact, BudgetParams,
};
use framepack_core::packing::{apply_schedule_bidirectional, PackOptions};
use framepack_core::planner::{Endpoint, GenerationPlan};
use framepack_core::rope::{generate_phases, pool_phases, DEFAULT_BASE};
use framepack_core::schedule::{KernelSpec, PackingSchedule, Segment, Side, TailMode};
use framepack_core::video::LatentVideo;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that cannot be met as written; see the README.
const KNOWN_RED: &[u32] = &[10];

type Verdict = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Verdict,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_video(r: &mut impl Rng, t: usize, h: usize, w: usize, c: usize) -> LatentVideo {
    let data = (0..t * h * w * c).map(|_| r.random_range(-1.0..1.0)).collect();
    LatentVideo::new(t, h, w, c, data).unwrap()
}

fn c1_convergence() -> Verdict {
    let lambda = BigRational::from_integer(2.into());
    let bound = length_bound(1024.0, 2.0, 1.0);
    ensure(bound == 3072.0, || format!("bound {bound}"))?;
    let mut prev_exact = BigRational::zero();
    let mut prev = 0.0;
    for t in 1..=4096u64 {
        let exact = total_length_exact(1024, &lambda, 1, t);
        ensure(exact > prev_exact, || format!("exact length not increasing at T={t}"))?;
        ensure(exact < BigRational::from_integer(3072.into()), || format!("exact length reaches bound at T={t}"))?;
        let f = total_length(&BudgetParams::new(1024, 2.0, 1, t).unwrap());
        ensure(f >= prev && f <= 3072.0, || format!("f64 length {f} at T={t}"))?;
        prev_exact = exact;
        prev = f;
    }
    ensure((prev - 3072.0).abs() <= 1e-6, || format!("T=4096 gives {prev}"))?;
    Ok(format!("exact series strictly increasing below 3072; f64 T=4096 -> {prev}"))
}

fn dyadic(num: i64, shift: u32) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::one() << shift as usize)
}

fn c2_rates() -> Verdict {
    let d = decompose_rate(&dyadic(21, 3)).map_err(|e| e.to_string())?;
    ensure(d.base_included && d.duplicated_levels == [1, 3] && d.dropped_levels.is_empty(), || format!("2.625 -> {d:?}"))?;
    ensure(d.reconstruct() == dyadic(21, 3), || "2.625 reconstruction".into())?;
    let mut r = rng(2);
    for _ in 0..1000 {
        let shift = r.random_range(0..=12u32);
        let num = r.random_range(1..=8i64 << shift);
        let b = dyadic(num, shift);
        let d = decompose_rate(&b).map_err(|e| format!("{b}: {e}"))?;
        // Sum the terms independently of `reconstruct`.
        let mut sum = if d.base_included { dyadic(2, 0) } else { BigRational::zero() };
        for &i in &d.duplicated_levels {
            sum += dyadic(1, i);
        }
        for &i in &d.dropped_levels {
            sum -= dyadic(1, i);
        }
        ensure(sum == b && d.reconstruct() == b, || format!("{b} -> {d:?}"))?;
    }
    Ok("2.625 -> {1,3}; 1000 random dyadic budgets exact".into())
}

const VARIANT_NAMES: [&str; 40] = [
    "td_f8k8f4k4f2k2f1k1_g9",
    "td_f64k8f16k4f4k2f1k1_g9",
    "td_f512k8f64k4f8k2f1k1_g9",
    "td_f512k16f64k8f8k2f1k1_g9",
    "td_f16k4f4k2f1k1_g9",
    "td_f16k4f2k2f1k1_g1",
    "td_f16k4f2k2f1k1_g4",
    "td_f16k4f2k2f1k1_g9",
    "tc_f16k4f2k2f1k1_g9",
    "ta_f16k4f2k2f1k1_g9",
    "td_f8k8f4k4f2k2f1k1_g9_x_f1k1",
    "td_f64k8f16k4f4k2f1k1_g9_x_f1k1",
    "td_f512k8f64k4f8k2f1k1_g9_x_f1k1",
    "td_f512k16f64k8f8k2f1k1_g9_x_f1k1",
    "td_f16k4f4k2f1k1_g9_x_f1k1",
    "td_f16k4f2k2f1k1_g1_x_f1k1",
    "td_f16k4f2k2f1k1_g4_x_f1k1",
    "td_f16k4f2k2f1k1_g9_x_f1k1",
    "tc_f16k4f2k2f1k1_g9_x_f1k1",
    "ta_f16k4f2k2f1k1_g9_x_f1k1",
    "f1k1_x_g9_f1k1f2k2f4k4f8k8_td",
    "f1k1_x_g9_f1k1f4k2f16k4f64k8_td",
    "f1k1_x_g9_f1k1f8k2f64k4f512k8_td",
    "f1k1_x_g9_f1k1f8k2f64k8f512k16_td",
    "f1k1_x_g9_f1k1f4k2f16k4_td",
    "f1k1_x_g1_f1k1f2k2f16k4_td",
    "f1k1_x_g4_f1k1f2k2f16k4_td",
    "f1k1_x_g9_f1k1f2k2f16k4_td",
    "f1k1_x_g9_f1k1f2k2f16k4_tc",
    "f1k1_x_g9_f1k1f2k2f16k4_ta",
    "td_f8k8f4k4f2k2f1k1_g9+D",
    "td_f64k8f16k4f4k2f1k1_g9+D",
    "td_f512k8f64k4f8k2f1k1_g9+D",
    "td_f512k16f64k8f8k2f1k1_g9+D",
    "td_f16k4f4k2f1k1_g9+D",
    "td_f16k4f2k2f1k1_g1+D",
    "td_f16k4f2k2f1k1_g4+D",
    "td_f16k4f2k2f1k1_g9+D",
    "tc_f16k4f2k2f1k1_g9+D",
    "ta_f16k4f2k2f1k1_g9+D",
];

fn mutate(r: &mut impl Rng, s: &str) -> String {
    const ALPHABET: &[u8] = b"tdacfkghwx_+D0123456789";
    let mut b = s.as_bytes().to_vec();
    for _ in 0..r.random_range(1..=3) {
        let at = r.random_range(0..=b.len());
        match r.random_range(0..5) {
            0 if at < b.len() => {
                b.remove(at);
            }
            1 => b.insert(at, *ALPHABET.choose(r).unwrap()),
            2 if at < b.len() => b[at] = *ALPHABET.choose(r).unwrap(),
            3 if at + 1 < b.len() => b.swap(at, at + 1),
            _ => {
                let end = (at + r.random_range(1..6)).min(b.len());
                let piece = b[at..end].to_vec();
                b.splice(at..at, piece);
            }
        }
    }
    String::from_utf8(b).unwrap()
}

fn c3_dsl() -> Verdict {
    for name in VARIANT_NAMES {
        let s = PackingSchedule::parse(name).map_err(|e| format!("{name}: {e}"))?;
        ensure(s.format() == name, || format!("{name} -> {}", s.format()))?;
    }
    let mut r = rng(3);
    let (mut accepted, mut synonyms) = (0, 0);
    for i in 0..10_000 {
        let src = VARIANT_NAMES[i % VARIANT_NAMES.len()];
        let fuzzed = mutate(&mut r, src);
        let Ok(s) = PackingSchedule::parse(&fuzzed) else { continue };
        accepted += 1;
        let canonical = s.format();
        let again = PackingSchedule::parse(&canonical).map_err(|e| format!("{fuzzed:?} -> {canonical:?}: {e}"))?;
        ensure(again == s && again.format() == canonical, || format!("{fuzzed:?} altered to {canonical:?}"))?;
        if canonical != fuzzed {
            synonyms += 1;
        }
    }
    Ok(format!(
        "40/40 variant names exact; 10000 fuzzed: {accepted} accepted (all round-trip, {synonyms} non-canonical spellings), {} rejected",
        10_000 - accepted
    ))
}

fn random_kernel(r: &mut impl Rng) -> KernelSpec {
    if r.random_bool(0.5) {
        KernelSpec::simplified(*[1, 2, 4, 8].choose(r).unwrap()).unwrap()
    } else {
        let p = [1, 2, 4, 8, 16];
        KernelSpec::new(*[1, 2, 4].choose(r).unwrap(), *p.choose(r).unwrap(), *p.choose(r).unwrap()).unwrap()
    }
}

fn random_entries(r: &mut impl Rng, min: usize) -> Vec<Segment> {
    (0..r.random_range(min..=3))
        .map(|_| {
            let k = random_kernel(r);
            Segment::frames(k.frames * r.random_range(1..=3), k)
        })
        .collect()
}

fn random_schedule(r: &mut impl Rng) -> PackingSchedule {
    let tail = Segment::Tail(*[TailMode::Delete, TailMode::Append, TailMode::Compress].choose(r).unwrap());
    let g = Segment::Generate(r.random_range(1..=9));
    let mut segs = Vec::new();
    match r.random_range(0..3) {
        0 => {
            if r.random_bool(0.7) {
                segs.push(tail);
            }
            segs.extend(random_entries(r, 0));
            segs.push(g);
        }
        1 => {
            if r.random_bool(0.7) {
                segs.push(tail);
            }
            segs.extend(random_entries(r, 0));
            segs.push(g);
            segs.push(Segment::Skip);
            segs.extend(random_entries(r, 1));
        }
        _ => {
            segs.extend(random_entries(r, 1));
            segs.push(Segment::Skip);
            segs.push(g);
            segs.extend(random_entries(r, 0));
            if r.random_bool(0.7) {
                segs.push(tail);
            }
        }
    }
    PackingSchedule::new(segs, false).unwrap()
}

fn c4_budget() -> Verdict {
    let mut r = rng(4);
    let mut total_tokens = 0;
    for case in 0..200 {
        let s = random_schedule(&mut r);
        let step = s
            .frame_entries()
            .map(|(_, _, k)| k.height.max(k.width))
            .chain([2])
            .max()
            .unwrap() as usize;
        let h = step * r.random_range(1..=3);
        let w = step * r.random_range(1..=3);
        let c = r.random_range(1..=3);
        let extra = if s.tail().is_some() { r.random_range(0..=12) } else { 0 };
        let tail_side = s.tail().map(|t| t.1);
        let frames_for = |side: Side| s.side_capacity(side) as usize + if tail_side == Some(side) { extra } else { 0 };
        let past = random_video(&mut r, frames_for(Side::Past), h, w, c);
        let future = random_video(&mut r, frames_for(Side::Future), h, w, c);
        let ctx = apply_schedule_bidirectional(&past, Some(&future), &s, PackOptions::default())
            .map_err(|e| format!("case {case} {s} H={h} W={w}: {e}"))?;
        let want = tokens_for_schedule(&s, h, w, extra).map_err(|e| e.to_string())?;
        ensure(ctx.budget == want && ctx.tail_frames == extra, || {
            format!("case {case} {s} H={h} W={w} tail={extra}: packed {} vs ledger {want}", ctx.budget)
        })?;
        total_tokens += want;
    }
    Ok(format!("200 random tuples agree ({total_tokens} tokens total)"))
}

/// Angle for axis position `pos`, frequency `j` of an axis with `d` channels.
fn reference_angle(pos: f64, j: usize, d: usize) -> f64 {
    pos * DEFAULT_BASE.powf(-2.0 * j as f64 / d as f64)
}

fn c5_rope() -> Verdict {
    let mut r = rng(5);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let k = random_kernel(&mut r);
        let (pf, ph, pw) = (k.frames as usize, k.height as usize, k.width as usize);
        let nt = pf * r.random_range(1..=3);
        let nh = ph * r.random_range(1..=2);
        let nw = pw * r.random_range(1..=2);
        let channels = 6 * r.random_range(1..=6);
        let mut times = Vec::with_capacity(nt);
        let mut t = r.random_range(0..5i64);
        for _ in 0..nt {
            times.push(t);
            t += r.random_range(1..4);
        }
        let grid = generate_phases(&times, nh, nw, channels).map_err(|e| e.to_string())?;
        let pooled = pool_phases(&grid, k).map_err(|e| format!("case {case}: {e}"))?;
        let d = channels / 3;
        let per_axis = d / 2;
        for ti in 0..nt / pf {
            let tm = times[ti * pf..(ti + 1) * pf].iter().sum::<i64>() as f64 / pf as f64;
            for hi in 0..nh / ph {
                let hm = (hi * ph) as f64 + (ph as f64 - 1.0) / 2.0;
                for wi in 0..nw / pw {
                    let wm = (wi * pw) as f64 + (pw as f64 - 1.0) / 2.0;
                    let got = pooled.phase(ti, hi, wi);
                    for j in 0..per_axis {
                        for (axis, pos) in [tm, hm, wm].into_iter().enumerate() {
                            let err = (got[axis * per_axis + j] - reference_angle(pos, j, d)).abs();
                            worst = worst.max(err);
                        }
                    }
                }
            }
        }
    }
    ensure(worst <= 1e-9, || format!("max pooled error {worst:e} rad"))?;

    let sparse = generate_phases(&[0, 5, 6, 7], 3, 2, 12).map_err(|e| e.to_string())?;
    let dense = generate_phases(&(0..8).collect::<Vec<_>>(), 3, 2, 12).map_err(|e| e.to_string())?;
    for (i, t) in [0, 5, 6, 7].into_iter().enumerate() {
        for h in 0..3 {
            for w in 0..2 {
                ensure(sparse.phase(i, h, w) == dense.phase(t, h, w), || format!("random access differs at t={t}"))?;
            }
        }
    }
    Ok(format!("100 grids, max error {worst:.1e} rad; indices {{0,5,6,7}} bit-identical"))
}

fn brute_inertia(video: &LatentVideo, cb: &Codebook) -> f64 {
    video
        .pixels()
        .map(|p| {
            (0..cb.k())
                .map(|i| cb.centroid(i).iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

fn c6_codebook() -> Verdict {
    let mut r = rng(6);
    let mut iters = 0;
    for fit in 0..500 {
        let k = [1, 8, 128][fit % 3];
        let c = r.random_range(1..=3);
        let side = if k == 128 { 12 } else { r.random_range(3..=6) };
        let t = r.random_range(1..=2);
        let v = random_video(&mut r, t, side, side, c);
        let cb = Codebook::fit(std::slice::from_ref(&v), FitConfig::new(k, fit as u64)).map_err(|e| e.to_string())?;
        let st = cb.stats().unwrap();
        iters += st.iterations;
        ensure(st.inertia_history.windows(2).all(|w| w[1] <= w[0]), || format!("fit {fit}: {:?}", st.inertia_history))?;
        let brute = brute_inertia(&v, &cb);
        ensure((brute - st.inertia).abs() <= 1e-9 * brute.max(1.0), || format!("fit {fit}: inertia {} vs {brute}", st.inertia))?;
        let once = cb.discretize(&v).map_err(|e| e.to_string())?;
        let twice = cb.discretize(&once).map_err(|e| e.to_string())?;
        ensure(once == twice, || format!("fit {fit}: discretize not idempotent"))?;
        if k == 1 {
            for ch in 0..c {
                let mean = v.pixels().map(|p| p[ch]).sum::<f64>() / (v.data().len() / c) as f64;
                ensure(once.pixels().all(|p| (p[ch] - mean).abs() <= 1e-6), || format!("fit {fit}: K=1 not the mean"))?;
            }
        }
    }

    let mut centres = [[0.0, 0.0], [10.0, 10.0]];
    let v = LatentVideo::from_fn(2, 6, 6, 2, |t, y, x, ch| {
        let base = if (t + y) % 2 == 0 { 0.0 } else { 10.0 };
        base + [-0.3, 0.1, 0.2][(x + ch) % 3]
    })
    .unwrap();
    for ch in 0..2 {
        for (which, centre) in centres.iter_mut().enumerate() {
            let vals: Vec<f64> = v.pixels().filter(|p| (p[0] > 5.0) == (which == 1)).map(|p| p[ch]).collect();
            centre[ch] = vals.iter().sum::<f64>() / vals.len() as f64;
        }
    }
    let cb = Codebook::fit(&[v], FitConfig::new(2, 11)).map_err(|e| e.to_string())?;
    let mut got = [cb.centroid(0).to_vec(), cb.centroid(1).to_vec()];
    got.sort_by(|a, b| a[0].total_cmp(&b[0]));
    for (g, want) in got.iter().zip(&centres) {
        ensure(g.iter().zip(want).all(|(a, b)| (a - b).abs() <= 1e-6), || format!("{g:?} vs {want:?}"))?;
    }
    Ok(format!("500 fits monotone ({iters} Lloyd steps); idempotent; K=1 mean; two clusters recovered"))
}

fn c7_similarity() -> Verdict {
    let mut r = rng(7);
    let opts = ImportanceOptions {
        lambda_time: 1e9,
        ..Default::default()
    };
    for case in 0..100 {
        let t = r.random_range(1..=12);
        let (h, w, c) = (r.random_range(1..=4), r.random_range(1..=4), r.random_range(1..=4));
        let v = random_video(&mut r, t, h, w, c);
        let target_time = r.random_range(0.0..100.0);
        let mut offsets: Vec<f64> = (1..=60).map(|i| i as f64 * 0.05).collect();
        offsets.shuffle(&mut r);
        let times: Vec<f64> = offsets[..t].iter().map(|o| target_time - o).collect();
        let target: Vec<f64> = (0..h * w * c).map(|_| r.random_range(-1.0..1.0)).collect();
        let perm = sort_by_importance(&v, &times, &target, target_time, opts).map_err(|e| e.to_string())?;
        let mut recency: Vec<usize> = (0..t).collect();
        recency.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
        ensure(perm == recency, || format!("case {case}: {perm:?} vs {recency:?}"))?;
    }
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (n, c) = (r.random_range(1..=16), r.random_range(1..=4));
        let f: Vec<f64> = (0..n * c).map(|_| r.random_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..n * c).map(|_| r.random_range(-1.0..1.0)).collect();
        let (a, b) = (r.random_range(0.01..100.0), r.random_range(0.01..100.0));
        let fa: Vec<f64> = f.iter().map(|v| v * a).collect();
        let xb: Vec<f64> = x.iter().map(|v| v * b).collect();
        let d = (sim_cos(&fa, &xb, c).unwrap() - sim_cos(&f, &x, c).unwrap()).abs();
        worst = worst.max(d);
    }
    ensure(worst <= 1e-9, || format!("scale invariance error {worst:e}"))?;
    let e1 = (sim_time(5.0, 4.0) - (-1.0f64).exp()).abs();
    ensure(e1 <= 1e-12, || format!("sim_time(1) off by {e1:e}"))?;
    Ok(format!("recency order 100/100; scale error {worst:.1e}; e^-1 error {e1:.1e}"))
}

fn c8_plans() -> Verdict {
    let vanilla = PackingSchedule::parse("td_f16k4f2k2f1k1_g9").unwrap();
    let endpoint = PackingSchedule::parse("td_f16k4f2k2f1k1_g9_x_f1k1").unwrap();
    let inverted = PackingSchedule::parse("f1k1_x_g9_f1k1f2k2f16k4_td").unwrap();
    let mut plans = 0;
    let mut refused = Vec::new();
    for total in (9..=108).step_by(9) {
        let sections = total / 9;
        let mut candidates = vec![
            ("vanilla", GenerationPlan::vanilla(total, 9, &vanilla)),
            ("endpoint", GenerationPlan::endpoint(total, 9, &endpoint)),
            ("inverted", GenerationPlan::inverted(total, 9, &inverted)),
        ];
        let anchor_sets: [Vec<usize>; 3] = [
            (0..sections).step_by(3).collect(),
            vec![sections - 1],
            if sections > 2 { vec![1, sections - 1] } else { vec![0] },
        ];
        for set in &anchor_sets {
            let eps: Vec<Endpoint> = set.iter().map(|&i| Endpoint::from(i * 9..i * 9 + 9)).collect();
            candidates.push(("multi", GenerationPlan::multi_endpoint(total, 9, &endpoint, &eps)));
        }
        for (mode, plan) in candidates {
            match plan {
                Ok(p) => {
                    p.validate().map_err(|e| format!("{mode} total={total}: {e}"))?;
                    plans += 1;
                }
                Err(e) if mode == "endpoint" && total < 18 => refused.push(format!("{mode}@{total}: {e}")),
                Err(e) => return Err(format!("{mode} total={total}: {e}")),
            }
        }
    }
    Ok(format!("{plans} plans valid; refused by precondition: {}", refused.join("; ")))
}

fn c9_drift() -> Verdict {
    let mut r = rng(9);
    for case in 0..100 {
        let t = r.random_range(2..=40);
        let (h, w, c) = (r.random_range(1..=6), r.random_range(1..=6), r.random_range(1..=3));
        let v = random_video(&mut r, t, h, w, c);
        let rev = v.reversed();
        for m in builtin_metrics() {
            let a = drift(&v, m.as_ref()).unwrap().drift;
            let b = drift(&rev, m.as_ref()).unwrap().drift;
            ensure(a == b, || format!("case {case} {}: {a} vs {b}", m.name()))?;
        }
    }
    let flat = LatentVideo::constant(17, 4, 4, 2, 0.3).unwrap();
    for m in builtin_metrics() {
        let d = drift(&flat, m.as_ref()).unwrap().drift;
        ensure(d == 0.0, || format!("constant video {} drift {d}", m.name()))?;
    }
    ensure(window_len(10) == 1, || format!("window(10) = {}", window_len(10)))?;
    Ok("reversal-exact on 100 videos x 3 metrics; constant -> 0; window(10) = 1".into())
}

fn c10_elo() -> Verdict {
    ensure(elo_update(1000.0, 1000.0, Outcome::A) == (1016.0, 984.0), || "first update".into())?;
    let mut r = rng(10);
    let players: Vec<String> = (0..12).map(|i| format!("p{i}")).collect();
    let mut table = RatingTable::new(1000.0);
    for p in &players {
        table.record(&MatchRecord::new(p.clone(), "anchor", Outcome::Draw).unwrap());
    }
    let base = table.sum();
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let pair: Vec<&String> = players.choose_multiple(&mut r, 2).collect();
        let o = *[Outcome::A, Outcome::B, Outcome::Draw].choose(&mut r).unwrap();
        table.record(&MatchRecord::new(pair[0].clone(), pair[1].clone(), o).unwrap());
        worst = worst.max((table.sum() - base).abs());
    }
    ensure(worst <= 1e-9, || format!("rating sum drifted by {worst:e}"))?;

    let published = [
        (1210.0, 1235.0, 1),
        (1169.0, 1175.0, 2),
        (1135.0, 1150.0, 3),
        (1100.0, 1118.0, 4),
        (1068.0, 1092.0, 5),
        (1030.0, 1050.0, 6),
    ];
    let ratings: Vec<f64> = published.iter().flat_map(|&(lo, hi, _)| [hi, lo]).collect();
    let want: Vec<usize> = published.iter().flat_map(|&(_, _, rank)| [rank, rank]).collect();
    let got = rank_ratings(&ratings, TIE_MARGIN);
    ensure(got == want, || {
        format!("(1016,984) exact; sum drift {worst:.1e}; published ranges {ratings:?} ranked {got:?}, expected {want:?}")
    })?;
    Ok(format!("(1016,984) exact; sum drift {worst:.1e}; published buckets reproduced"))
}

fn c11_fplt() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut r = rng(11);
    for case in 0..50 {
        let (t, c) = match case % 3 {
            0 => (1, r.random_range(1..=4)),
            1 => (r.random_range(1..=4), 1),
            _ => (r.random_range(1..=4), r.random_range(1..=4)),
        };
        let (h, w) = (r.random_range(1..=5), r.random_range(1..=5));
        let data = (0..t * h * w * c)
            .map(|_| loop {
                let f = f32::from_bits(r.random());
                if f.is_finite() {
                    break f as f64;
                }
            })
            .collect();
        let v = LatentVideo::new(t, h, w, c, data).unwrap();
        let a = dir.path().join(format!("{case}a.fplt"));
        let b = dir.path().join(format!("{case}b.fplt"));
        write_video(&a, &v).map_err(|e| e.to_string())?;
        let back = read_video(&a).map_err(|e| e.to_string())?;
        write_video(&b, &back).map_err(|e| e.to_string())?;
        let (ba, bb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        ensure(ba == bb, || format!("case {case}: rewritten bytes differ"))?;
        ensure(back.data().iter().zip(v.data()).all(|(x, y)| x.to_bits() == y.to_bits()), || {
            format!("case {case}: values differ")
        })?;
        ensure(FpltFile::decode(&ba).map_err(|e| e.to_string())?.encode() == ba, || format!("case {case}: re-encode"))?;
    }
    Ok("50 tensors byte-identical (T=1 and C=1 included)".into())
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "convergence bound", limit: Some(Duration::from_secs(1)), run: c1_convergence },
        Criterion { id: 2, name: "arbitrary-rate construction", limit: Some(Duration::from_secs(1)), run: c2_rates },
        Criterion { id: 3, name: "schedule name round trip", limit: Some(Duration::from_secs(5)), run: c3_dsl },
        Criterion { id: 4, name: "budget/packing equivalence", limit: None, run: c4_budget },
        Criterion { id: 5, name: "rope pooling", limit: None, run: c5_rope },
        Criterion { id: 6, name: "codebook", limit: None, run: c6_codebook },
        Criterion { id: 7, name: "similarity sorting", limit: None, run: c7_similarity },
        Criterion { id: 8, name: "plan coverage", limit: None, run: c8_plans },
        Criterion { id: 9, name: "drift metric", limit: None, run: c9_drift },
        Criterion { id: 10, name: "elo", limit: None, run: c10_elo },
        Criterion { id: 11, name: "fplt round trip", limit: None, run: c11_fplt },
    ];
    let mut unexpected = Vec::new();
    let mut stale = Vec::new();
    for c in &criteria {
        let start = Instant::now();
        let mut result = (c.run)();
        let took = start.elapsed();
        if let (Ok(detail), Some(limit)) = (&result, c.limit) {
            if took > limit {
                result = Err(format!("{detail}; took {took:?}, limit {limit:?}"));
            }
        }
        match &result {
            Ok(detail) => {
                println!("PASS {:>2} {} [{:.0?}] {detail}", c.id, c.name, took);
                if KNOWN_RED.contains(&c.id) {
                    stale.push(c.id);
                }
            }
            Err(why) => {
                let tag = if KNOWN_RED.contains(&c.id) { "FAIL (known)" } else { "FAIL" };
                println!("{tag} {:>2} {} [{:.0?}] {why}", c.id, c.name, took);
                if !KNOWN_RED.contains(&c.id) {
                    unexpected.push(c.id);
                }
            }
        }
    }
    if !unexpected.is_empty() {
        eprintln!("criteria failed: {unexpected:?}");
        std::process::exit(1);
    }
    if !stale.is_empty() {
        eprintln!("known-red criteria now pass, update KNOWN_RED: {stale:?}");
        std::process::exit(1);
    }
}
