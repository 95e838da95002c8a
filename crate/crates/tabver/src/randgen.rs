//! Seeded generators for random tables and well-sorted random programs.
//!
//! Test suites use these to drive differential oracles and invariant
//! checks; the benches use them as workload sources. Everything is
//! deterministic in the seed.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dsl::{EntityKind, Program, ProgramNode, Sort};
use crate::exec::{execute_bool, execute};
use crate::table::Table;

const WORDS: &[&str] = &[
    "alpha", "bravo", "delta", "echo", "falcon", "ground", "harbor", "indigo", "jade",
    "kite", "lunar", "mesa", "north", "opal", "pine", "quartz", "river", "slate",
];

const COLUMN_NAMES: &[&str] = &[
    "name", "score", "year", "rank", "points", "venue", "date", "total", "wins",
    "losses", "attendance",
];

/// Oddball literals that exercise escaping and text comparison paths.
const NASTY_TEXT: &[&str] = &["a;b", "x { y", "back\\slash", "semi; colon", "n/a"];

/// Random rectangular table: mixed numeric and text columns, with enough
/// repeated values that filters and coreference have something to match.
pub fn random_table(rng: &mut impl Rng, max_rows: usize, max_cols: usize) -> Table {
    let cols = rng.gen_range(1..=max_cols.max(1));
    let rows = rng.gen_range(1..=max_rows.max(1));
    let mut names: Vec<&str> = COLUMN_NAMES.to_vec();
    names.shuffle(rng);
    let header: Vec<String> = names[..cols].iter().map(|s| s.to_string()).collect();
    let numeric: Vec<bool> = (0..cols).map(|_| rng.gen_bool(0.6)).collect();
    let mut raw_rows = Vec::with_capacity(rows);
    for _ in 0..rows {
        let mut row = Vec::with_capacity(cols);
        for (c, is_num) in numeric.iter().enumerate() {
            let cell = if *is_num {
                match rng.gen_range(0..10) {
                    0 => "n/a".to_string(),
                    1 => format!("{}.{}", rng.gen_range(0..40), rng.gen_range(0..10)),
                    _ => rng.gen_range(0..40).to_string(),
                }
            } else {
                let w = WORDS[rng.gen_range(0..WORDS.len())];
                if c == 0 {
                    w.to_string()
                } else {
                    format!("{} {}", w, WORDS[rng.gen_range(0..WORDS.len())])
                }
            };
            row.push(cell);
        }
        raw_rows.push(row);
    }
    Table::new("random", "", header, raw_rows).expect("generated table is valid")
}

fn random_literal(rng: &mut impl Rng, t: &Table) -> ProgramNode {
    match rng.gen_range(0..4) {
        0 => ProgramNode::entity(EntityKind::Literal, rng.gen_range(0..40).to_string()),
        1 => {
            let r = rng.gen_range(0..t.n_rows());
            let c = rng.gen_range(0..t.n_cols());
            let raw = t.cell(r, c).raw.clone();
            if raw.trim().is_empty() {
                ProgramNode::entity(EntityKind::Literal, "0")
            } else {
                ProgramNode::entity(EntityKind::Cell, raw)
            }
        }
        2 => ProgramNode::entity(
            EntityKind::Literal,
            NASTY_TEXT[rng.gen_range(0..NASTY_TEXT.len())],
        ),
        _ => ProgramNode::entity(EntityKind::Literal, WORDS[rng.gen_range(0..WORDS.len())]),
    }
}

fn random_column(rng: &mut impl Rng, t: &Table) -> ProgramNode {
    // mostly valid columns, occasionally a miss
    let text = if rng.gen_bool(0.9) {
        t.header[rng.gen_range(0..t.n_cols())].clone()
    } else {
        "missing column".to_string()
    };
    ProgramNode::entity(EntityKind::Column, text)
}

fn functions_returning(sort: Sort) -> Vec<&'static crate::dsl::FunctionSpec> {
    crate::dsl::catalog()
        .iter()
        .filter(|s| s.return_sort == sort && s.arity() > 0)
        .collect()
}

fn gen_node(rng: &mut impl Rng, t: &Table, sort: Sort, depth: usize) -> ProgramNode {
    let leaf: Option<ProgramNode> = match sort {
        Sort::View => Some(ProgramNode::all_rows()),
        Sort::Num => Some(ProgramNode::entity(
            EntityKind::Literal,
            rng.gen_range(0..40).to_string(),
        )),
        Sort::Obj => Some(random_literal(rng, t)),
        Sort::Col => Some(random_column(rng, t)),
        Sort::Bool | Sort::Row => None,
    };
    if let Some(leaf) = &leaf {
        if depth == 0 || (sort != Sort::Bool && rng.gen_bool(0.4)) {
            return leaf.clone();
        }
    }
    let has_leaf = |s: Sort| !matches!(s, Sort::Bool | Sort::Row);
    let mut candidates = functions_returning(sort);
    if depth == 0 {
        // leafless sorts must still bottom out: allow only functions
        // whose arguments can all be leaves
        candidates.retain(|c| c.arg_sorts.iter().all(|&s| has_leaf(s)));
    }
    if candidates.is_empty() {
        return leaf.expect("sorts without leaves always have functions");
    }
    let spec = candidates[rng.gen_range(0..candidates.len())];
    let children = spec
        .arg_sorts
        .iter()
        .map(|&s| gen_node(rng, t, s, depth.saturating_sub(1)))
        .collect();
    ProgramNode::Function {
        name: spec.name,
        children,
    }
}

/// Random well-sorted program rooted at `sort`, at most `depth` function
/// layers deep.
pub fn random_program(rng: &mut impl Rng, t: &Table, sort: Sort, depth: usize) -> Program {
    Program::new(gen_node(rng, t, sort, depth))
}

/// Random Bool-rooted programs that execute to true on `t`, deduplicated
/// by rendering; gives up after a bounded number of attempts.
pub fn random_true_programs(rng: &mut impl Rng, t: &Table, want: usize) -> Vec<Program> {
    let mut out: Vec<Program> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for _ in 0..want * 60 {
        if out.len() >= want {
            break;
        }
        let p = random_program(rng, t, Sort::Bool, 3);
        if execute_bool(&p, t) == Ok(true) && seen.insert(p.render()) {
            out.push(p);
        }
    }
    out
}

/// Random programs of any root sort paired with their execution outcome;
/// useful for differential testing.
pub fn random_programs_any(
    rng: &mut impl Rng,
    t: &Table,
    n: usize,
    depth: usize,
) -> Vec<Program> {
    let sorts = [Sort::Bool, Sort::Num, Sort::View, Sort::Obj];
    (0..n)
        .map(|_| {
            let sort = sorts[rng.gen_range(0..sorts.len())];
            random_program(rng, t, sort, depth)
        })
        .collect()
}

/// Convenience: `(program, value-or-error)` pairs for `n` random draws.
pub fn random_executions(
    rng: &mut impl Rng,
    t: &Table,
    n: usize,
    depth: usize,
) -> Vec<(Program, Result<crate::exec::Value, crate::exec::ExecError>)> {
    random_programs_any(rng, t, n, depth)
        .into_iter()
        .map(|p| {
            let v = execute(&p, t);
            (p, v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_program;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parse_render_round_trips_random_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let t = random_table(&mut rng, 5, 4);
            let p = random_program(&mut rng, &t, Sort::Bool, 3);
            let text = p.render();
            let back = parse_program(&text)
                .unwrap_or_else(|e| panic!("{text:?} failed to parse: {e}"));
            // kinds are positional: normalize Cell to Literal for comparison
            assert_eq!(normalize_kinds(&back), normalize_kinds(&p), "{text}");
        }
    }

    fn normalize_kinds(p: &Program) -> Program {
        fn walk(n: &ProgramNode) -> ProgramNode {
            match n {
                ProgramNode::Function { name, children } => ProgramNode::Function {
                    name,
                    children: children.iter().map(walk).collect(),
                },
                ProgramNode::Entity { kind, text } => ProgramNode::Entity {
                    kind: match kind {
                        EntityKind::Cell => EntityKind::Literal,
                        k => *k,
                    },
                    text: text.clone(),
                },
            }
        }
        Program::new(walk(&p.root))
    }

    #[test]
    fn generators_are_deterministic() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let t = random_table(&mut rng, 5, 4);
            let ps = random_programs_any(&mut rng, &t, 20, 3);
            ps.iter().map(Program::render).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn true_programs_execute_true() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_table(&mut rng, 5, 4);
        for p in random_true_programs(&mut rng, &t, 10) {
            assert_eq!(execute_bool(&p, &t), Ok(true), "{}", p.render());
        }
    }
}
