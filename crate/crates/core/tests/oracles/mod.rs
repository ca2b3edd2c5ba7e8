//! Reference implementations written independently of the library, used as
//! test oracles. Shared between the core tests and the acceptance target.
#![allow(dead_code)]

use gazegrammar_core::fsm::{ActionKind, FsmState};
use gazegrammar_core::grasp::GripAssessment;
use gazegrammar_core::scene::GpBits;

// ---------------------------------------------------------------- pinhole

/// Textbook pinhole: focal length in pixels from the half field of view.
pub fn pinhole_project(x: f64, y: f64, z: f64, width: u32, height: u32, hfov_h: f64, hfov_v: f64) -> (f64, f64) {
    let fx = (width as f64 / 2.0) / hfov_h.tan();
    let fy = (height as f64 / 2.0) / hfov_v.tan();
    (fx * x / z, fy * y / z)
}

// ---------------------------------------------------------------- FSM

/// Hand-written transition table for intent = true, reachable = true.
/// Columns: state, gazed GP, grip report, next state, actions.
const ACTIVE: &str = "
001 00 open  001 -
001 01 open  001 -
001 10 open  110 Reach,Grasp
001 11 open  111 Reach,Grasp
001 00 empty 001 -
001 01 empty 001 -
001 10 empty 001 -
001 11 empty 001 -
001 00 held  001 -
001 01 held  001 -
001 10 held  001 -
001 11 held  001 -
101 00 open  001 Release
101 01 open  001 Release
101 10 open  001 Release
101 11 open  001 Release
101 00 empty 001 Release
101 01 empty 001 Release
101 10 empty 001 Release
101 11 empty 001 Release
101 00 held  001 Release
101 01 held  001 Release
101 10 held  001 Release
101 11 held  001 Release
110 00 open  001 Reach,Drop
110 01 open  001 Reach,Drop
110 10 open  110 -
110 11 open  110 -
110 00 empty 101 -
110 01 empty 101 -
110 10 empty 101 -
110 11 empty 101 -
110 00 held  001 Reach,Drop
110 01 held  001 Reach,Drop
110 10 held  110 -
110 11 held  110 -
111 00 open  111 Reach,Pour
111 01 open  001 Reach,Drop
111 10 open  111 -
111 11 open  111 -
111 00 empty 101 -
111 01 empty 101 -
111 10 empty 101 -
111 11 empty 101 -
111 00 held  111 Reach,Pour
111 01 held  001 Reach,Drop
111 10 held  111 -
111 11 held  111 -
";

/// Without intent, or with an unreachable target, only the glove matters.
/// Columns: state, grip report, next state, actions.
const PASSIVE: &str = "
001 open  001 -
001 empty 001 -
001 held  001 -
101 open  001 Release
101 empty 001 Release
101 held  001 Release
110 open  110 -
110 empty 101 -
110 held  110 -
111 open  111 -
111 empty 101 -
111 held  111 -
";

fn parse_state(s: &str) -> FsmState {
    match s {
        "001" => FsmState::S001,
        "101" => FsmState::S101,
        "110" => FsmState::S110,
        "111" => FsmState::S111,
        _ => panic!("state {s}"),
    }
}

fn parse_grip(s: &str) -> GripAssessment {
    match s {
        "open" => GripAssessment::OPEN,
        "empty" => GripAssessment::CLOSED_EMPTY,
        "held" => GripAssessment::CLOSED_HELD,
        _ => panic!("grip {s}"),
    }
}

fn parse_actions(s: &str) -> Vec<ActionKind> {
    if s == "-" {
        return vec![];
    }
    s.split(',')
        .map(|a| match a {
            "Reach" => ActionKind::Reach,
            "Grasp" => ActionKind::Grasp,
            "Drop" => ActionKind::Drop,
            "Pour" => ActionKind::Pour,
            "Release" => ActionKind::Release,
            _ => panic!("action {a}"),
        })
        .collect()
}

pub const GRIPS: [GripAssessment; 3] = [GripAssessment::OPEN, GripAssessment::CLOSED_EMPTY, GripAssessment::CLOSED_HELD];
pub const GPS: [GpBits; 4] = [GpBits::CONTAINER, GpBits::SURFACE, GpBits::SOLID, GpBits::POURABLE];

/// Expected (next state, action kinds) for one of the 192 input combinations.
pub fn fsm_oracle(
    state: FsmState,
    intent: bool,
    gp: GpBits,
    reachable: bool,
    grip: GripAssessment,
) -> (FsmState, Vec<ActionKind>) {
    let rows = if intent && reachable { ACTIVE } else { PASSIVE };
    for line in rows.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split_whitespace().collect();
        let (s, rest) = (parse_state(f[0]), &f[1..]);
        let (g, rest) = if intent && reachable {
            (Some(GpBits::parse(rest[0]).unwrap()), &rest[1..])
        } else {
            (None, rest)
        };
        if s == state && g.is_none_or(|g| g == gp) && parse_grip(rest[0]) == grip {
            return (parse_state(rest[1]), parse_actions(rest[2]));
        }
    }
    panic!("no oracle row for {state:?} {intent} {gp:?} {reachable} {grip:?}");
}

// ---------------------------------------------------------------- dwell

/// One classified sample: `Some((object, is_trigger))` or `None` for nothing.
pub type Sym = Option<(u8, bool)>;

/// Intent fires at the 15th sample of each maximal run of consecutive
/// trigger samples on the same object, and nowhere else.
pub fn dwell_oracle(seq: &[Sym], n: usize) -> Vec<bool> {
    let mut out = vec![false; seq.len()];
    let mut i = 0;
    while i < seq.len() {
        match seq[i] {
            Some((obj, true)) => {
                let mut j = i;
                while j < seq.len() && seq[j] == Some((obj, true)) {
                    j += 1;
                }
                if j - i >= n {
                    out[i + n - 1] = true;
                }
                i = j;
            }
            _ => i += 1,
        }
    }
    out
}

// ---------------------------------------------------------------- stats

/// Rank of each value: one plus the number of smaller values, plus half the
/// number of other equal values.
pub fn brute_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|x| {
            let less = xs.iter().filter(|y| *y < x).count() as f64;
            let equal = xs.iter().filter(|y| *y == x).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn brute_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

pub fn brute_spearman(a: &[f64], b: &[f64]) -> f64 {
    brute_pearson(&brute_ranks(a), &brute_ranks(b))
}

/// Classic no-ties formula, for permutations.
pub fn spearman_no_ties(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ra = brute_ranks(a);
    let rb = brute_ranks(b);
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// F from the total and within sums of squares.
pub fn brute_anova(groups: &[Vec<f64>]) -> f64 {
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let k = groups.len() as f64;
    let grand = all.iter().sum::<f64>() / n;
    let sst: f64 = all.iter().map(|x| (x - grand).powi(2)).sum();
    let ssw: f64 = groups
        .iter()
        .map(|g| {
            let m = g.iter().sum::<f64>() / g.len() as f64;
            g.iter().map(|x| (x - m).powi(2)).sum::<f64>()
        })
        .sum();
    ((sst - ssw) / (k - 1.0)) / (ssw / (n - k))
}

/// All permutations of `items`, Heap's algorithm.
pub fn permutations(items: &[f64]) -> Vec<Vec<f64>> {
    let mut a = items.to_vec();
    let n = a.len();
    let mut c = vec![0usize; n];
    let mut out = vec![a.clone()];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}
