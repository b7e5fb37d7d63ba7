//! Small C snippets with one planted flaw and its repair. Three flaw kinds:
//! a buffer filled with the wrong size, a pointer freed twice and an
//! allocation used without a null check. The kind doubles as a class label.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::RawPair;

pub const LABELS: [&str; 3] = ["memset_size", "double_free", "null_check"];

const NAMES: &[&str] = &["bad", "sink", "process", "helper", "run", "handle", "action", "work"];
const VARS: &[&str] = &["data", "buf", "str", "ptr", "line", "src"];
const SIZES: &[u32] = &[10, 20, 50, 64, 100, 128];
const TYPES: &[&str] = &["char", "int", "long"];
const FILLERS: &[&str] = &[
    "printLine(\"begin\");",
    "printLine(\"done\");",
    "printIntLine(0);",
    "srand(1);",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyntheticOptions {
    /// Maximum filler statements per snippet.
    pub max_fillers: usize,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        SyntheticOptions { max_fillers: 1 }
    }
}

fn pick<'a, T, R: Rng>(rng: &mut R, xs: &'a [T]) -> &'a T {
    xs.choose(rng).unwrap()
}

fn fillers<R: Rng>(rng: &mut R, max: usize) -> Vec<&'static str> {
    let k = rng.gen_range(0..=max);
    (0..k).map(|_| *pick(rng, FILLERS)).collect()
}

fn body(name: &str, lines: &[String]) -> String {
    let mut s = format!("void {name}()\n{{\n");
    for l in lines {
        s.push_str("    ");
        s.push_str(l);
        s.push('\n');
    }
    s.push_str("}\n");
    s
}

fn memset_size<R: Rng>(rng: &mut R, opts: &SyntheticOptions) -> (String, String) {
    let name = pick(rng, NAMES);
    let v = pick(rng, VARS);
    let mut sizes = SIZES.to_vec();
    sizes.shuffle(rng);
    let (small, big) = (sizes[0].min(sizes[1]), sizes[0].max(sizes[1]));
    let make = |fill: u32, extra: &[&str]| {
        let mut lines = vec![
            format!("char dest[{small}] = \"\";"),
            format!("char {v}[{big}];"),
            format!("memset({v}, 'A', {fill}-1);"),
            format!("{v}[{fill}-1] = '\\0';"),
        ];
        lines.extend(extra.iter().map(|s| s.to_string()));
        lines.push(format!("strcpy(dest, {v});"));
        body(name, &lines)
    };
    let extra = fillers(rng, opts.max_fillers);
    (make(big, &extra), make(small, &extra))
}

fn double_free<R: Rng>(rng: &mut R, opts: &SyntheticOptions) -> (String, String) {
    let name = pick(rng, NAMES);
    let v = pick(rng, VARS);
    let t = pick(rng, TYPES);
    let n = pick(rng, SIZES);
    let extra = fillers(rng, opts.max_fillers);
    let make = |twice: bool| {
        let mut lines = vec![
            format!("{t} * {v};"),
            format!("{v} = NULL;"),
            format!("{v} = ({t} *)malloc({n}*sizeof({t}));"),
        ];
        lines.extend(extra.iter().map(|s| s.to_string()));
        lines.push(format!("free({v});"));
        if twice {
            lines.push(format!("free({v});"));
        }
        body(name, &lines)
    };
    (make(true), make(false))
}

fn null_check<R: Rng>(rng: &mut R, opts: &SyntheticOptions) -> (String, String) {
    let name = pick(rng, NAMES);
    let v = pick(rng, VARS);
    let t = pick(rng, TYPES);
    let n = pick(rng, SIZES);
    let extra = fillers(rng, opts.max_fillers);
    let make = |checked: bool| {
        let mut lines = vec![format!("{t} * {v} = ({t} *)malloc({n}*sizeof({t}));")];
        if checked {
            lines.push(format!("if ({v} == NULL) {{exit(-1);}}"));
        }
        lines.push(format!("{v}[0] = 0;"));
        lines.extend(extra.iter().map(|s| s.to_string()));
        lines.push(format!("free({v});"));
        body(name, &lines)
    };
    (make(false), make(true))
}

/// `n` pairs cycling through the three flaw kinds, deterministic in `seed`.
pub fn generate(n: usize, seed: u64, opts: &SyntheticOptions) -> Vec<RawPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let kind = i % LABELS.len();
            let (source, target) = match kind {
                0 => memset_size(&mut rng, opts),
                1 => double_free(&mut rng, opts),
                _ => null_check(&mut rng, opts),
            };
            RawPair {
                id: format!("syn-{seed}-{i}"),
                source,
                targets: vec![target],
                label: Some(LABELS[kind].to_string()),
            }
        })
        .collect()
}
