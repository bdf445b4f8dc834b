//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use socbist::core_model::{CoreId, CoreSpec, SocSpec};
use socbist::fault_lab::{Fault, GateKind, Netlist, Pattern, StuckAt};
use socbist::hybrid_testgen::{CurveOracle, CurveRow};
use socbist::scheduler::{Mode, NodeKind, ScheduleGraph};
use socbist::units::{Mhz, Micros, Power};

pub const FIVE_CORE: &str = include_str!("../../fixtures/five_core.soc");
pub const C17: &str = include_str!("../../fixtures/c17.bench");
pub const AND1: &str = include_str!("../../fixtures/and1.bench");

pub fn fixture(path: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(path)
}

// ---------------------------------------------------------------------------
// power groups

/// Every maximal feasible subset, by checking all 2^n subsets.
pub fn brute_force_groups(powers: &[i64], p_max: i64) -> BTreeSet<Vec<CoreId>> {
    let n = powers.len();
    let sum = |mask: u32| (0..n).filter(|i| mask >> i & 1 == 1).map(|i| powers[i]).sum::<i64>();
    let mut out = BTreeSet::new();
    for mask in 1u32..(1 << n) {
        let total = sum(mask);
        if total > p_max {
            continue;
        }
        let maximal = (0..n).all(|i| mask >> i & 1 == 1 || total + powers[i] > p_max);
        if maximal {
            out.insert((0..n).filter(|i| mask >> i & 1 == 1).map(|i| i as CoreId + 1).collect());
        }
    }
    out
}

pub fn soc_from(powers: &[i64], times: &[(i64, i64)], p_max: i64) -> SocSpec {
    let cores = powers
        .iter()
        .zip(times)
        .enumerate()
        .map(|(i, (&p, &(vd, vp)))| {
            CoreSpec::with_times(
                i as CoreId + 1,
                Power::from_centi(p),
                Micros::from_centi(vd),
                Micros::from_centi(vp),
                Mhz::from_units(100),
            )
        })
        .collect();
    SocSpec::new("random", cores, Power::from_centi(p_max), 0, Mhz::from_units(100)).unwrap()
}

/// A random SoC: up to `max_cores` cores, every core within budget.
pub fn random_soc(rng: &mut ChaCha8Rng, max_cores: usize) -> SocSpec {
    let n = rng.gen_range(1..=max_cores);
    let p_max = rng.gen_range(100..=1000) * 100;
    let powers: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=p_max / 100) * 100).collect();
    let times: Vec<(i64, i64)> =
        (0..n).map(|_| (rng.gen_range(0..=50) * 1000, rng.gen_range(0..=50) * 1000)).collect();
    let times = times.into_iter().map(|(a, b)| if a + b == 0 { (100, 0) } else { (a, b) }).collect::<Vec<_>>();
    soc_from(&powers, &times, p_max)
}

// ---------------------------------------------------------------------------
// circuits and fault simulation

fn eval_scalar(kind: GateKind, ins: &[bool]) -> bool {
    let and = ins.iter().all(|&b| b);
    let or = ins.iter().any(|&b| b);
    let xor = ins.iter().filter(|&&b| b).count() % 2 == 1;
    match kind {
        GateKind::And => and,
        GateKind::Nand => !and,
        GateKind::Or => or,
        GateKind::Nor => !or,
        GateKind::Xor => xor,
        GateKind::Xnor => !xor,
        GateKind::Not => !ins[0],
        GateKind::Buff | GateKind::Dff => ins[0],
    }
}

/// Net values for one pattern, relaxing gates in any order until nothing
/// changes. `fault` forces one net.
pub fn scalar_values(nl: &Netlist, p: &Pattern, fault: Option<Fault>) -> Vec<bool> {
    let forced = |net: usize, v: bool| match fault {
        Some(f) if f.net == net => f.stuck == StuckAt::One,
        _ => v,
    };
    let mut val: Vec<Option<bool>> = vec![None; nl.num_nets()];
    for (i, &net) in nl.inputs().iter().enumerate() {
        val[net] = Some(forced(net, p.0[i]));
    }
    loop {
        let mut changed = false;
        for g in nl.gates().iter().rev() {
            if val[g.output].is_some() {
                continue;
            }
            let ins: Option<Vec<bool>> = g.inputs.iter().map(|&n| val[n]).collect();
            if let Some(ins) = ins {
                val[g.output] = Some(forced(g.output, eval_scalar(g.kind, &ins)));
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    val.into_iter().map(|v| v.expect("every net driven")).collect()
}

pub fn scalar_detects(nl: &Netlist, p: &Pattern, fault: Fault) -> bool {
    let good = scalar_values(nl, p, None);
    let bad = scalar_values(nl, p, Some(fault));
    nl.outputs().iter().any(|&o| good[o] != bad[o])
}

/// Faults detected by at least one pattern, one pattern and fault at a time.
pub fn scalar_fault_sim(nl: &Netlist, patterns: &[Pattern], faults: &[Fault]) -> BTreeSet<Fault> {
    faults.iter().copied().filter(|&f| patterns.iter().any(|p| scalar_detects(nl, p, f))).collect()
}

/// A random `.bench` circuit with `inputs` inputs and `gates` gates (at most
/// 30). Gates read earlier nets only; a few flip-flops add scan cells.
pub fn random_bench(rng: &mut ChaCha8Rng, inputs: usize, gates: usize) -> String {
    let kinds = ["AND", "NAND", "OR", "NOR", "XOR", "XNOR", "NOT", "BUFF"];
    let mut text = String::new();
    let mut nets: Vec<String> = (0..inputs).map(|i| format!("i{i}")).collect();
    for n in &nets {
        text += &format!("INPUT({n})\n");
    }
    let dffs = rng.gen_range(0..=2usize);
    for d in 0..dffs {
        nets.push(format!("q{d}"));
    }
    let mut used = vec![false; nets.len() + gates];
    let mut body = String::new();
    for g in 0..gates {
        let kind = kinds[rng.gen_range(0..kinds.len())];
        let arity = if matches!(kind, "NOT" | "BUFF") { 1 } else { rng.gen_range(2..=3) };
        let mut ins = Vec::new();
        for _ in 0..arity {
            let k = rng.gen_range(0..nets.len());
            used[k] = true;
            ins.push(nets[k].clone());
        }
        let out = format!("g{g}");
        body += &format!("{out} = {kind}({})\n", ins.join(", "));
        nets.push(out);
    }
    let first_gate = inputs + dffs;
    let mut outputs: Vec<String> = (first_gate..nets.len()).filter(|&k| !used[k]).map(|k| nets[k].clone()).collect();
    if outputs.is_empty() {
        outputs.push(nets[nets.len() - 1].clone());
    }
    for o in &outputs {
        text += &format!("OUTPUT({o})\n");
    }
    for d in 0..dffs {
        let src = &nets[rng.gen_range(first_gate..nets.len())];
        body += &format!("q{d} = DFF({src})\n");
    }
    text + &body
}

pub fn random_patterns(rng: &mut ChaCha8Rng, width: usize, n: usize) -> Vec<Pattern> {
    (0..n).map(|_| Pattern((0..width).map(|_| rng.gen()).collect())).collect()
}

// ---------------------------------------------------------------------------
// coverage curves

/// A curve on every point of `0..=range` whose DTP savings per extra PRTP
/// never increase: `d(n+1) = d(n) - max(0, s0 - n / w)`. With any positive
/// pattern times the resulting TAT curve is convex.
pub fn convex_curve(s0: u64, w: u64, range: u64) -> CurveOracle {
    let total: u64 = (0..range).map(|n| s0.saturating_sub(n / w)).sum();
    let mut d = total + 5;
    let mut rows = Vec::with_capacity(range as usize + 1);
    for n in 0..=range {
        rows.push(CurveRow { n_prtp: n, n_dtp_phase1: 3, n_dtp_phase2: d });
        if n < range {
            d -= s0.saturating_sub(n / w);
        }
    }
    CurveOracle::new(rows).unwrap()
}

/// Timing core: BIST at 100 MHz, one cycle per PRTP; DTPs take `ac_e` cycles.
pub fn timing_core(ac_e: u64) -> CoreSpec {
    CoreSpec {
        ac_e,
        ..CoreSpec::with_times(1, Power::from_units(1), Micros::ZERO, Micros::ZERO, Mhz::from_units(100))
    }
}

// ---------------------------------------------------------------------------
// schedules

/// Checks a schedule node by node against the SoC: power, one external part
/// at most, durations equal to the shortest remaining part, exact release
/// lists, uninterrupted external parts, node kinds, work conservation and
/// the total. Augmentations add BIST work (and remove external work) at the
/// entry of their node. Returns the final clock.
pub fn replay_check(soc: &SocSpec, g: &ScheduleGraph) -> Result<Micros, String> {
    let n = soc.cores.len();
    let mut bist: Vec<i64> = soc.cores.iter().map(|c| c.t_vp.centi()).collect();
    let mut ext: Vec<i64> = soc.cores.iter().map(|c| c.t_vd.centi()).collect();
    let mut delivered = vec![(0i64, 0i64); n];
    let mut ext_state = vec![0u8; n]; // 0 not started, 1 running, 2 done
    let powers: Vec<i64> = soc.cores.iter().map(|c| c.p_m.centi()).collect();
    let groups = brute_force_groups(&powers, soc.p_max.centi());
    let mut clock = 0i64;

    for (k, node) in g.nodes.iter().enumerate() {
        let at = format!("node {}", k + 1);
        if node.index != k + 1 {
            return Err(format!("{at}: index {}", node.index));
        }
        for a in g.augmentations.iter().filter(|a| a.node == k + 1) {
            let i = a.core_id as usize - 1;
            bist[i] += a.extra_bist.centi();
            ext[i] = (ext[i] - a.saved_external.centi()).max(0);
        }
        let cores: Vec<CoreId> = node.active.iter().map(|p| p.core).collect();
        if cores.windows(2).any(|w| w[0] >= w[1]) || cores.is_empty() {
            return Err(format!("{at}: active parts not sorted or empty"));
        }
        let power: i64 = cores.iter().map(|&c| powers[c as usize - 1]).sum();
        if power > soc.p_max.centi() {
            return Err(format!("{at}: power {power} over budget"));
        }
        let externals: Vec<CoreId> =
            node.active.iter().filter(|p| p.mode == Mode::External).map(|p| p.core).collect();
        if externals.len() > 1 {
            return Err(format!("{at}: {} external parts", externals.len()));
        }
        for (i, s) in ext_state.iter().enumerate() {
            if *s == 1 && !externals.contains(&(i as CoreId + 1)) {
                return Err(format!("{at}: external part of core {} paused", i + 1));
            }
        }
        let rem = |p: &socbist::scheduler::Part| {
            let i = p.core as usize - 1;
            match p.mode {
                Mode::Bist => bist[i],
                Mode::External => ext[i],
            }
        };
        let shortest = node.active.iter().map(rem).min().unwrap();
        if shortest <= 0 {
            return Err(format!("{at}: runs a finished part"));
        }
        if node.duration.centi() != shortest {
            return Err(format!("{at}: duration {} but shortest part {}", node.duration.centi(), shortest));
        }
        let mut released = Vec::new();
        for p in &node.active {
            let i = p.core as usize - 1;
            let r = match p.mode {
                Mode::Bist => {
                    delivered[i].0 += shortest;
                    &mut bist[i]
                }
                Mode::External => {
                    delivered[i].1 += shortest;
                    ext_state[i] = 1;
                    &mut ext[i]
                }
            };
            *r -= shortest;
            if *r == 0 {
                released.push(*p);
                if p.mode == Mode::External {
                    ext_state[i] = 2;
                }
            }
        }
        if released != node.releases {
            return Err(format!("{at}: releases {:?}, expected {:?}", node.releases, released));
        }
        let is_group = groups.contains(&cores);
        if (node.kind == NodeKind::Group) != is_group {
            return Err(format!("{at}: kind {:?} for {:?}", node.kind, cores));
        }
        clock += shortest;
    }
    if let Some(i) = (0..n).find(|&i| bist[i] != 0 || ext[i] != 0) {
        return Err(format!("core {} unfinished: bist {} ext {}", i + 1, bist[i], ext[i]));
    }
    for t in &g.targets {
        let d = delivered[t.core_id as usize - 1];
        if d != (t.bist.centi(), t.external.centi()) {
            return Err(format!("core {}: delivered {:?}, target {:?}", t.core_id, d, t));
        }
    }
    if g.total_time.centi() != clock {
        return Err(format!("total {} but clock {}", g.total_time.centi(), clock));
    }
    Ok(Micros::from_centi(clock))
}

/// A second implementation of the greedy scheduler, written for clarity
/// rather than speed: weights as exact fractions over brute-force groups,
/// one event per loop iteration. Returns text lines in the same shape as
/// the library's text output.
pub fn reference_schedule(soc: &SocSpec) -> Vec<String> {
    let n = soc.cores.len();
    let powers: Vec<i64> = soc.cores.iter().map(|c| c.p_m.centi()).collect();
    let groups: Vec<Vec<CoreId>> = brute_force_groups(&powers, soc.p_max.centi()).into_iter().collect();
    let mut vp: Vec<i128> = soc.cores.iter().map(|c| i128::from(c.t_vp.centi())).collect();
    let mut vd: Vec<i128> = soc.cores.iter().map(|c| i128::from(c.t_vd.centi())).collect();
    let mut running: Option<usize> = None;
    let mut lines = Vec::new();
    let mut total = 0i128;

    // fraction (num, den) in µs-based units
    let more = |a: (i128, i128), b: (i128, i128)| a.0 * b.1 > b.0 * a.1;
    let same = |a: (i128, i128), b: (i128, i128)| a.0 * b.1 == b.0 * a.1;

    while vp.iter().chain(vd.iter()).any(|&x| x > 0) {
        let any_ext = vd.iter().any(|&x| x > 0);
        let mut best: Option<Candidate> = None;
        for g in &groups {
            let idx: Vec<usize> = g.iter().map(|&c| c as usize - 1).collect();
            let (w, ext) = match running {
                Some(e) if !idx.contains(&e) => continue,
                Some(e) => (ext_weight(&idx, e, &vd, &vp), Some(e)),
                None => {
                    let mut e = idx[0];
                    for &i in &idx {
                        if vd[i] > vd[e] {
                            e = i;
                        }
                    }
                    if any_ext && vd[e] > 0 {
                        (ext_weight(&idx, e, &vd, &vp), Some(e))
                    } else {
                        let s: i128 = idx.iter().map(|&i| vp[i]).sum();
                        ((s, 100 * idx.len() as i128), None)
                    }
                }
            };
            let parts: Vec<(usize, Mode)> = idx
                .iter()
                .filter_map(|&i| {
                    if Some(i) == ext {
                        Some((i, Mode::External))
                    } else if vp[i] > 0 {
                        Some((i, Mode::Bist))
                    } else {
                        None
                    }
                })
                .collect();
            if parts.is_empty() {
                continue;
            }
            let better = match &best {
                None => true,
                Some((bw, bg, _)) => {
                    more(w, *bw) || (same(w, *bw) && (g.len() > bg.len() || (g.len() == bg.len() && g < *bg)))
                }
            };
            if better {
                best = Some((w, g, parts));
            }
        }
        let (_, g, parts) = best.expect("some group always has work");
        let rem = |&(i, m): &(usize, Mode)| if m == Mode::External { vd[i] } else { vp[i] };
        let dur = parts.iter().map(rem).min().unwrap();
        let mut released = Vec::new();
        running = None;
        for &(i, m) in &parts {
            let r = if m == Mode::External { &mut vd[i] } else { &mut vp[i] };
            *r -= dur;
            if *r == 0 {
                released.push((i, m));
            } else if m == Mode::External {
                running = Some(i);
            }
        }
        let cores: Vec<CoreId> = parts.iter().map(|&(i, _)| i as CoreId + 1).collect();
        let kind = if groups.contains(&cores) { "group" } else { "incomplete" };
        let fmt = |v: &[(usize, Mode)]| {
            v.iter().map(|&(i, m)| format!("{}{}", m.letter(), i + 1)).collect::<Vec<_>>().join(" ")
        };
        let rel = if released.is_empty() { "-".to_string() } else { fmt(&released) };
        let _ = g;
        lines.push(format!(
            "node {} {kind} {} active {} releases {rel}",
            lines.len() + 1,
            Micros::from_centi(dur as i64),
            fmt(&parts)
        ));
        total += dur;
        assert!(lines.len() <= 4 * n + 4, "reference scheduler did not terminate");
    }
    lines.push(format!("total {}", Micros::from_centi(total as i64)));
    lines
}

type Candidate<'a> = ((i128, i128), &'a Vec<CoreId>, Vec<(usize, Mode)>);

fn ext_weight(idx: &[usize], e: usize, vd: &[i128], vp: &[i128]) -> (i128, i128) {
    if idx.len() == 1 {
        return (vd[e], 100);
    }
    let s: i128 = idx.iter().filter(|&&i| i != e).map(|&i| vp[i]).sum();
    (vd[e] * s, 10_000 * (idx.len() as i128 - 1))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-core work a schedule delivers, from the nodes alone.
pub fn delivered_work(g: &ScheduleGraph) -> BTreeMap<CoreId, (Micros, Micros)> {
    let mut m: BTreeMap<CoreId, (Micros, Micros)> = BTreeMap::new();
    for node in &g.nodes {
        for p in &node.active {
            let e = m.entry(p.core).or_default();
            match p.mode {
                Mode::Bist => e.0 += node.duration,
                Mode::External => e.1 += node.duration,
            }
        }
    }
    m
}
