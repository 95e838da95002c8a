//! Synthetic verification corpus: statements over generated tables whose
//! gold labels are provable by executing the template's program, so the
//! corpus is correct by construction.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dsl::parse_program;
use crate::exec::execute_bool;
use crate::table::Table;
use crate::verifier::Label;

use super::dataset::{Channel, Sample};

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    /// Total samples; rounded down to a multiple of two for exact
    /// label balance.
    pub samples: usize,
    pub seed: u64,
    pub min_rows: usize,
    pub max_rows: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            samples: 500,
            seed: 11,
            min_rows: 3,
            max_rows: 6,
        }
    }
}

const NAMES: &[&str] = &[
    "alpha", "bravo", "carina", "delta", "echo", "foxtrot", "gamma", "helios", "indigo",
    "juliet", "kilo", "lima", "mike", "nova", "oscar", "polaris", "quebec", "romeo",
    "sierra", "tango", "ursa", "victor", "willow", "xenon", "yankee", "zulu",
];

#[derive(Clone, Copy, Debug)]
enum Template {
    Count,
    Min,
    Max,
    Only,
    Greater,
}

/// Template cycle. The comparative template appears once per ten pairs:
/// its two labels produce identical evidence sets (argument order is the
/// only difference, and the graph is order-symmetric), so it is near
/// chance for any verifier over this graph and would otherwise dominate
/// the error budget.
const TEMPLATES: [Template; 10] = [
    Template::Count,
    Template::Min,
    Template::Max,
    Template::Only,
    Template::Greater,
    Template::Count,
    Template::Min,
    Template::Max,
    Template::Only,
    Template::Min,
];

struct Generated {
    entailed_statement: String,
    refuted_statement: String,
    /// Programs proving each gold label, executed as a self-check.
    entailed_program: String,
    refuted_check: String,
    channel: Channel,
}

/// Table columns: name (unique key), score, points. Values are distinct
/// within numeric columns except where a template needs duplicates.
fn gen_table(rng: &mut ChaCha8Rng, spec: &SyntheticSpec, id: String, dup_score: bool) -> Table {
    let rows = rng.gen_range(spec.min_rows..=spec.max_rows);
    let mut names: Vec<&str> = NAMES.to_vec();
    names.shuffle(rng);
    // cell values start above any plausible row count, so a count
    // statement's number can never collide with a cell comparison
    let mut scores = distinct_values(rng, rows, 10..90);
    if dup_score && rows >= 2 {
        scores[1] = scores[0];
    }
    let points = distinct_values(rng, rows, 10..90);
    let raw: Vec<Vec<String>> = (0..rows)
        .map(|r| {
            vec![
                names[r].to_string(),
                scores[r].to_string(),
                points[r].to_string(),
            ]
        })
        .collect();
    Table::new(
        id,
        "",
        vec!["name".into(), "score".into(), "points".into()],
        raw,
    )
    .expect("synthetic tables are rectangular")
}

fn distinct_values(rng: &mut ChaCha8Rng, n: usize, range: std::ops::Range<i64>) -> Vec<i64> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v = rng.gen_range(range.clone());
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn column_values(t: &Table, col: usize) -> Vec<i64> {
    t.rows
        .iter()
        .map(|r| r[col].raw.parse::<i64>().unwrap())
        .collect()
}

fn gen_pair(rng: &mut ChaCha8Rng, template: Template, t: &Table) -> Generated {
    let col_idx = if rng.gen_bool(0.5) { 1 } else { 2 };
    let col = t.header[col_idx].clone();
    let values = column_values(t, col_idx);
    match template {
        Template::Count => {
            let n = t.n_rows();
            let wrong = if rng.gen_bool(0.5) { n + 1 } else { (n - 1).max(1) };
            let wrong = if wrong == n { n + 1 } else { wrong };
            Generated {
                entailed_statement: format!("the number of rows in the table be {n}"),
                refuted_statement: format!("the number of rows in the table be {wrong}"),
                entailed_program: format!("eq {{ count {{ all_rows }} ; {n} }}"),
                refuted_check: format!("eq {{ count {{ all_rows }} ; {wrong} }}"),
                channel: Channel::Simple,
            }
        }
        Template::Min => {
            let min = *values.iter().min().unwrap();
            let wrong = min + rng.gen_range(1..4);
            Generated {
                entailed_statement: format!("the smallest {col} be {min}"),
                refuted_statement: format!("the smallest {col} be {wrong}"),
                entailed_program: format!("eq {{ min {{ all_rows ; {col} }} ; {min} }}"),
                refuted_check: format!("eq {{ min {{ all_rows ; {col} }} ; {wrong} }}"),
                channel: Channel::Simple,
            }
        }
        Template::Max => {
            let max = *values.iter().max().unwrap();
            let wrong = (max - rng.gen_range(1..4)).max(0);
            Generated {
                entailed_statement: format!("the largest {col} be {max}"),
                refuted_statement: format!("the largest {col} be {wrong}"),
                entailed_program: format!("eq {{ max {{ all_rows ; {col} }} ; {max} }}"),
                refuted_check: format!("eq {{ max {{ all_rows ; {col} }} ; {wrong} }}"),
                channel: Channel::Simple,
            }
        }
        Template::Only => {
            // scores carry one duplicated value at rows 0/1; any other
            // value appears exactly once
            let values = column_values(t, 1);
            let unique = *values[2..].iter().min().unwrap();
            let duplicated = values[0];
            Generated {
                entailed_statement: format!("there be only 1 row with score of {unique}"),
                refuted_statement: format!("there be only 1 row with score of {duplicated}"),
                entailed_program: format!(
                    "only {{ filter_eq {{ all_rows ; score ; {unique} }} }}"
                ),
                refuted_check: format!(
                    "only {{ filter_eq {{ all_rows ; score ; {duplicated} }} }}"
                ),
                channel: Channel::Simple,
            }
        }
        Template::Greater => {
            let (hi, lo) = {
                let mut rows: Vec<usize> = (0..t.n_rows()).collect();
                rows.shuffle(rng);
                let (a, b) = (rows[0], rows[1]);
                if values[a] > values[b] {
                    (a, b)
                } else {
                    (b, a)
                }
            };
            let hi_name = t.cell(hi, 0).raw.clone();
            let lo_name = t.cell(lo, 0).raw.clone();
            let program = |x: &str, y: &str| {
                format!(
                    "greater {{ hop {{ filter_eq {{ all_rows ; name ; {x} }} ; {col} }} ; hop {{ filter_eq {{ all_rows ; name ; {y} }} ; {col} }} }}"
                )
            };
            Generated {
                entailed_statement: format!("{hi_name} have a higher {col} than {lo_name}"),
                refuted_statement: format!("{lo_name} have a higher {col} than {hi_name}"),
                entailed_program: program(&hi_name, &lo_name),
                refuted_check: program(&lo_name, &hi_name),
                channel: Channel::Complex,
            }
        }
    }
}

/// Generate an exactly label-balanced corpus. Every emitted gold label is
/// verified against the executor before the sample is kept.
pub fn gen_synthetic(spec: &SyntheticSpec) -> (Vec<Sample>, HashMap<String, Table>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pairs = spec.samples / 2;
    let mut samples = Vec::with_capacity(pairs * 2);
    let mut tables = HashMap::new();
    for i in 0..pairs {
        let template = TEMPLATES[i % TEMPLATES.len()];
        let id = format!("syn-{i:04}");
        let table = gen_table(
            &mut rng,
            spec,
            id.clone(),
            matches!(template, Template::Only),
        );
        let g = gen_pair(&mut rng, template, &table);

        // gold labels are provable by construction; check it
        let proof = parse_program(&g.entailed_program).expect("template parses");
        assert_eq!(
            execute_bool(&proof, &table),
            Ok(true),
            "entailed proof failed: {} on {id}",
            g.entailed_program
        );
        let refuted = parse_program(&g.refuted_check).expect("template parses");
        assert_eq!(
            execute_bool(&refuted, &table),
            Ok(false),
            "refuted check not false: {} on {id}",
            g.refuted_check
        );

        samples.push(Sample {
            table_id: id.clone(),
            statement: g.entailed_statement,
            label: Label::Entailed,
            channel: g.channel,
        });
        samples.push(Sample {
            table_id: id.clone(),
            statement: g.refuted_statement,
            label: Label::Refuted,
            channel: g.channel,
        });
        tables.insert(id, table);
    }
    (samples, tables)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_exactly_balanced() {
        let (samples, tables) = gen_synthetic(&SyntheticSpec {
            samples: 100,
            seed: 3,
            ..SyntheticSpec::default()
        });
        assert_eq!(samples.len(), 100);
        let entailed = samples.iter().filter(|s| s.label == Label::Entailed).count();
        assert_eq!(entailed, 50);
        assert_eq!(tables.len(), 50);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticSpec {
            samples: 30,
            seed: 4,
            ..SyntheticSpec::default()
        };
        let (a, _) = gen_synthetic(&spec);
        let (b, _) = gen_synthetic(&spec);
        assert_eq!(a, b);
    }

    #[test]
    fn every_table_resolves() {
        let (samples, tables) = gen_synthetic(&SyntheticSpec {
            samples: 40,
            seed: 5,
            ..SyntheticSpec::default()
        });
        for s in &samples {
            assert!(tables.contains_key(&s.table_id));
        }
    }

    #[test]
    fn channels_cover_simple_and_complex() {
        let (samples, _) = gen_synthetic(&SyntheticSpec {
            samples: 50,
            seed: 6,
            ..SyntheticSpec::default()
        });
        assert!(samples.iter().any(|s| s.channel == Channel::Simple));
        assert!(samples.iter().any(|s| s.channel == Channel::Complex));
    }
}
