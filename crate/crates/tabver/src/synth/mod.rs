//! Latent program search: link statement entities to the table, then
//! enumerate well-sorted programs bottom-up, executing each candidate as
//! it is built and memoizing intermediate values.

mod lexicon;
mod link;

pub use lexicon::{trigger_functions, LexiconError, TriggerLexicon, BASE_FUNCTIONS};
pub use link::{link_entities, statement_words, EntityTarget, LinkedEntity, StatementWord};

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rust_decimal::Decimal;

use crate::dsl::{catalog, EntityKind, Program, ProgramNode, Sort};
use crate::exec::{apply, ArgValue, Value};
use crate::table::{CellValue, Table};

/// Resource limits for one synthesis run.
#[derive(Debug, Clone)]
pub struct SearchBudget {
    /// Rounds of function application; each round may nest one deeper.
    pub max_depth: usize,
    /// Cap on recorded Bool-rooted programs.
    pub max_programs: usize,
    /// Cap on memoized intermediate values (views, numbers, objects).
    pub max_intermediates: usize,
    /// Wall-clock limit, checked between candidate batches.
    pub time_limit: Duration,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_depth: 4,
            max_programs: 5_000,
            max_intermediates: 20_000,
            time_limit: Duration::from_secs(10),
        }
    }
}

/// The synthesized program set: Bool-rooted programs with their execution
/// labels, deduplicated by canonical rendering, in discovery order.
#[derive(Debug, Clone)]
pub struct ProgramSet {
    pub items: Vec<(Program, bool)>,
    pub statement: String,
    pub table_id: String,
    /// Set when a budget cap stopped the search early.
    pub truncated: bool,
}

struct Item<V> {
    node: ProgramNode,
    value: V,
    layer: usize,
}

#[derive(Default)]
struct Pools {
    views: Vec<Item<Vec<usize>>>,
    view_keys: HashMap<Vec<usize>, usize>,
    nums: Vec<Item<Decimal>>,
    num_keys: HashMap<Decimal, usize>,
    objs: Vec<Item<CellValue>>,
    obj_keys: HashMap<String, usize>,
    /// (column index, entity text); always layer 0.
    cols: Vec<(usize, String)>,
    bools: Vec<Item<bool>>,
}

impl Pools {
    fn intermediates(&self) -> usize {
        self.views.len() + self.nums.len() + self.objs.len()
    }
}

#[derive(Clone)]
struct Cand {
    node: ProgramNode,
    arg: ArgValue,
    layer: usize,
    /// Rendering of `node`, for duplicate-argument suppression.
    key: String,
}

struct Search<'a> {
    table: &'a Table,
    budget: &'a SearchBudget,
    started: Instant,
    pools: Pools,
    seen: HashMap<String, ()>,
    items: Vec<(Program, bool)>,
    truncated: bool,
}

impl<'a> Search<'a> {
    fn out_of_time(&mut self) -> bool {
        if self.started.elapsed() > self.budget.time_limit {
            self.truncated = true;
            true
        } else {
            false
        }
    }

    fn record_intermediate(&mut self, node: ProgramNode, value: Value, layer: usize) {
        if self.pools.intermediates() >= self.budget.max_intermediates {
            self.truncated = true;
            return;
        }
        match value {
            Value::View(v) => {
                match self.pools.view_keys.get(&v) {
                    Some(&i) => maybe_shorter(&mut self.pools.views[i], node),
                    None => {
                        self.pools.view_keys.insert(v.clone(), self.pools.views.len());
                        self.pools.views.push(Item { node, value: v, layer });
                    }
                }
            }
            Value::Num(n) => match self.pools.num_keys.get(&n) {
                Some(&i) => maybe_shorter(&mut self.pools.nums[i], node),
                None => {
                    self.pools.num_keys.insert(n, self.pools.nums.len());
                    self.pools.nums.push(Item { node, value: n, layer });
                }
            },
            Value::Obj(c) => {
                let key = c.norm_text();
                match self.pools.obj_keys.get(&key) {
                    Some(&i) => maybe_shorter(&mut self.pools.objs[i], node),
                    None => {
                        self.pools.obj_keys.insert(key, self.pools.objs.len());
                        self.pools.objs.push(Item { node, value: c, layer });
                    }
                }
            }
            Value::Bool(_) | Value::Row(_) => {}
        }
    }

    /// Returns false when the program cap is hit.
    fn record_bool(&mut self, node: ProgramNode, label: bool, layer: usize) -> bool {
        if self.items.len() >= self.budget.max_programs {
            self.truncated = true;
            return false;
        }
        let program = Program::new(node.clone());
        let text = program.render();
        if self.seen.contains_key(&text) {
            return true;
        }
        self.seen.insert(text, ());
        self.items.push((program, label));
        // `and` results never feed further conjunctions: retrieval
        // decomposes them back into conjuncts that are already recorded,
        // so nesting would only multiply duplicates
        let is_and = matches!(&node, ProgramNode::Function { name, .. } if *name == "and");
        if !is_and {
            self.pools.bools.push(Item {
                node,
                value: label,
                layer,
            });
        }
        self.items.len() < self.budget.max_programs
    }

    fn slot_candidates(&self, sort: Sort, snap: &Snapshot) -> Vec<Cand> {
        fn cand(node: &ProgramNode, arg: ArgValue, layer: usize) -> Cand {
            Cand {
                node: node.clone(),
                arg,
                layer,
                key: Program::new(node.clone()).render(),
            }
        }
        let mut out = Vec::new();
        match sort {
            Sort::View => {
                for it in &self.pools.views[..snap.views] {
                    out.push(cand(&it.node, ArgValue::Val(Value::View(it.value.clone())), it.layer));
                }
            }
            Sort::Col => {
                for (idx, text) in &self.pools.cols {
                    let node = ProgramNode::entity(EntityKind::Column, text);
                    out.push(cand(&node, ArgValue::Col(*idx), 0));
                }
            }
            Sort::Num => {
                for it in &self.pools.nums[..snap.nums] {
                    out.push(cand(&it.node, ArgValue::Val(Value::Num(it.value)), it.layer));
                }
                for it in &self.pools.objs[..snap.objs] {
                    if it.value.as_number().is_some() {
                        out.push(cand(
                            &it.node,
                            ArgValue::Val(Value::Obj(it.value.clone())),
                            it.layer,
                        ));
                    }
                }
            }
            Sort::Obj => {
                // computed numbers first, so symmetric pairs render
                // aggregate-versus-literal in that order
                for it in &self.pools.nums[..snap.nums] {
                    out.push(cand(&it.node, ArgValue::Val(Value::Num(it.value)), it.layer));
                }
                for it in &self.pools.objs[..snap.objs] {
                    out.push(cand(
                        &it.node,
                        ArgValue::Val(Value::Obj(it.value.clone())),
                        it.layer,
                    ));
                }
            }
            Sort::Bool => {
                for it in &self.pools.bools[..snap.bools] {
                    out.push(cand(&it.node, ArgValue::Val(Value::Bool(it.value)), it.layer));
                }
            }
            Sort::Row => {}
        }
        out
    }
}

fn maybe_shorter(existing: &mut Item<impl Sized>, node: ProgramNode) {
    // same value and sort: keep the shorter rendering
    let old = Program::new(existing.node.clone()).render();
    let new = Program::new(node.clone()).render();
    if new.len() < old.len() {
        existing.node = node;
    }
}

struct Snapshot {
    views: usize,
    nums: usize,
    objs: usize,
    bools: usize,
}

/// Synthesize with the builtin trigger lexicon.
pub fn synthesize(statement: &str, t: &Table, budget: &SearchBudget) -> ProgramSet {
    synthesize_with(statement, t, budget, TriggerLexicon::builtin())
}

/// Bottom-up layered enumeration. Seeds are the linked entities plus the
/// whole-table view; each round applies every trigger-enabled function to
/// sort-compatible arguments where at least one argument is from the
/// newest layer. Deterministic in `(statement, t, budget)`.
pub fn synthesize_with(
    statement: &str,
    t: &Table,
    budget: &SearchBudget,
    lexicon: &TriggerLexicon,
) -> ProgramSet {
    let mut search = Search {
        table: t,
        budget,
        started: Instant::now(),
        pools: Pools::default(),
        seen: HashMap::new(),
        items: Vec::new(),
        truncated: false,
    };
    let empty = |search: Search| ProgramSet {
        items: search.items,
        statement: statement.to_string(),
        table_id: t.id.clone(),
        truncated: search.truncated,
    };
    if budget.max_programs == 0 {
        search.truncated = true;
        return empty(search);
    }

    let enabled = lexicon.enabled_functions(statement);
    let links = link_entities(statement, t);

    // seed layer 0
    search.pools.view_keys.insert(
        (0..t.n_rows()).collect(),
        0,
    );
    search.pools.views.push(Item {
        node: ProgramNode::all_rows(),
        value: (0..t.n_rows()).collect(),
        layer: 0,
    });
    let mut seen_cols = Vec::new();
    let mut add_col = |pools: &mut Pools, c: usize, t: &Table| {
        if !seen_cols.contains(&c) {
            seen_cols.push(c);
            pools.cols.push((c, t.norm_header()[c].clone()));
        }
    };
    for link in &links {
        match &link.target {
            EntityTarget::Column(c) => add_col(&mut search.pools, *c, t),
            EntityTarget::Cell { row, col } => {
                // linked cells also make their column available
                add_col(&mut search.pools, *col, t);
                let cell = t.cell(*row, *col).clone();
                let text = cell.raw.trim().to_string();
                if !text.is_empty() {
                    let node = ProgramNode::entity(EntityKind::Cell, &text);
                    search.record_intermediate(node, Value::Obj(cell), 0);
                }
            }
            EntityTarget::Number(n) => {
                let text = n.normalize().to_string();
                let node = ProgramNode::entity(EntityKind::Literal, &text);
                search.record_intermediate(node, Value::Obj(CellValue::new(text)), 0);
            }
        }
    }

    'rounds: for round in 1..=budget.max_depth {
        if search.out_of_time() {
            break;
        }
        let snap = Snapshot {
            views: search.pools.views.len(),
            nums: search.pools.nums.len(),
            objs: search.pools.objs.len(),
            bools: search.pools.bools.len(),
        };
        for spec in catalog() {
            if spec.arity() == 0 || !enabled.contains(spec.name) {
                continue;
            }
            if search.out_of_time() {
                break 'rounds;
            }
            let slots: Vec<Vec<Cand>> = spec
                .arg_sorts
                .iter()
                .map(|&s| search.slot_candidates(s, &snap))
                .collect();
            if slots.iter().any(|s| s.is_empty()) {
                continue;
            }
            let pairs_same_sort = spec.arity() == 2 && spec.arg_sorts[0] == spec.arg_sorts[1];
            // eq{x;x} and both orderings of a symmetric function say
            // nothing; antisymmetric comparisons keep both orders so the
            // argument order can mirror either reading of the statement
            let symmetric = matches!(spec.name, "eq" | "not_eq" | "and");
            let mut idx = vec![0usize; slots.len()];
            let mut ticks = 0usize;
            'combos: loop {
                ticks += 1;
                if ticks % 512 == 0 && search.out_of_time() {
                    break 'rounds;
                }
                let combo: Vec<&Cand> = idx.iter().zip(&slots).map(|(&i, s)| &s[i]).collect();
                let skip = pairs_same_sort
                    && (combo[0].key == combo[1].key || (symmetric && idx[0] > idx[1]));
                let fresh = combo.iter().map(|c| c.layer).max() == Some(round - 1);
                if fresh && !skip {
                    let args: Vec<ArgValue> = combo.iter().map(|c| c.arg.clone()).collect();
                    if let Ok(value) = apply(spec, &args, search.table) {
                        let node = ProgramNode::Function {
                            name: spec.name,
                            children: combo.iter().map(|c| c.node.clone()).collect(),
                        };
                        match value {
                            Value::Bool(b) => {
                                if !search.record_bool(node, b, round) {
                                    break 'rounds;
                                }
                            }
                            v => search.record_intermediate(node, v, round),
                        }
                    }
                }
                // advance the odometer, last slot fastest
                let mut k = slots.len() - 1;
                loop {
                    if idx[k] + 1 < slots[k].len() {
                        idx[k] += 1;
                        for i in idx.iter_mut().skip(k + 1) {
                            *i = 0;
                        }
                        break;
                    }
                    if k == 0 {
                        break 'combos;
                    }
                    idx[k] = 0;
                    k -= 1;
                }
            }
        }
    }

    ProgramSet {
        items: search.items,
        statement: statement.to_string(),
        table_id: t.id.clone(),
        truncated: search.truncated,
    }
}
