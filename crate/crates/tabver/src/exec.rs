//! Typed bottom-up evaluation of programs against a table.
//!
//! `execute` walks the tree; `apply` implements one function application
//! over already-evaluated arguments and is shared with program synthesis,
//! so enumerated programs and re-executed programs cannot disagree.

use rust_decimal::Decimal;
use std::cmp::Ordering;
use thiserror::Error;

use crate::dsl::{lookup, EntityKind, FunctionSpec, Program, ProgramNode, Sort};
use crate::table::{CellValue, Table, TableError};

/// Result of evaluating a (sub-)program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Bool(bool),
    Num(Decimal),
    Obj(CellValue),
    /// Strictly increasing row indices.
    View(Vec<usize>),
    Row(usize),
}

impl Value {
    pub fn sort(&self) -> Sort {
        match self {
            Value::Bool(_) => Sort::Bool,
            Value::Num(_) => Sort::Num,
            Value::Obj(_) => Sort::Obj,
            Value::View(_) => Sort::View,
            Value::Row(_) => Sort::Row,
        }
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Num(n) => write!(f, "{}", n.normalize()),
            Value::Obj(c) => {
                for ch in c.raw.chars() {
                    if matches!(ch, '{' | '}' | ';' | '\\') {
                        write!(f, "\\")?;
                    }
                    write!(f, "{ch}")?;
                }
                Ok(())
            }
            Value::View(rows) => {
                write!(f, "view {{ ")?;
                for (i, r) in rows.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ; ")?;
                    }
                    write!(f, "{r}")?;
                }
                if rows.is_empty() {
                    write!(f, "}}")
                } else {
                    write!(f, " }}")
                }
            }
            Value::Row(r) => write!(f, "row {{ {r} }}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error("argument of sort {got:?} where {want:?} expected in {function}")]
    Sort {
        function: &'static str,
        want: Sort,
        got: Sort,
    },
    #[error("column {name:?} not found in table")]
    UnresolvedColumn { name: String },
    #[error("column {name:?} is ambiguous")]
    AmbiguousColumn { name: String },
    #[error("{function} over an empty or all non-numeric view")]
    EmptyView { function: &'static str },
    #[error("{function} needs a view of {want} rows, got {got}")]
    Cardinality {
        function: &'static str,
        got: usize,
        want: usize,
    },
    #[error("function {name:?} applied to {got} arguments, expects {want}")]
    Arity {
        name: String,
        got: usize,
        want: usize,
    },
    #[error("unknown function {name:?}")]
    UnknownFunction { name: String },
    #[error("decimal arithmetic overflow in {function}")]
    Numeric { function: &'static str },
}

impl ExecError {
    /// Coarse error class, used when comparing against oracles.
    pub fn class(&self) -> &'static str {
        match self {
            ExecError::Sort { .. } => "sort",
            ExecError::UnresolvedColumn { .. } => "unresolved_column",
            ExecError::AmbiguousColumn { .. } => "ambiguous_column",
            ExecError::EmptyView { .. } => "empty_view",
            ExecError::Cardinality { .. } => "cardinality",
            ExecError::Arity { .. } => "arity",
            ExecError::UnknownFunction { .. } => "unknown_function",
            ExecError::Numeric { .. } => "numeric",
        }
    }
}

/// One evaluated argument: a value, or a resolved column index for
/// column-sorted positions.
#[derive(Debug, Clone)]
pub enum ArgValue {
    Val(Value),
    Col(usize),
}

fn cell_from_num(n: Decimal) -> CellValue {
    CellValue::new(n.normalize().to_string())
}

/// Total comparison used by every filter and equality function: numeric
/// when both sides parse as numbers, lexical on normalized text otherwise.
pub fn compare_cells(a: &CellValue, b: &CellValue) -> Ordering {
    match (a.as_number(), b.as_number()) {
        (Some(x), Some(y)) => x.cmp(&y),
        _ => a.norm_text().cmp(&b.norm_text()),
    }
}

fn as_view<'a>(f: &'static str, a: &'a ArgValue) -> Result<&'a [usize], ExecError> {
    match a {
        ArgValue::Val(Value::View(v)) => Ok(v),
        ArgValue::Val(v) => Err(ExecError::Sort {
            function: f,
            want: Sort::View,
            got: v.sort(),
        }),
        ArgValue::Col(_) => Err(ExecError::Sort {
            function: f,
            want: Sort::View,
            got: Sort::Col,
        }),
    }
}

fn as_col(f: &'static str, a: &ArgValue) -> Result<usize, ExecError> {
    match a {
        ArgValue::Col(c) => Ok(*c),
        ArgValue::Val(v) => Err(ExecError::Sort {
            function: f,
            want: Sort::Col,
            got: v.sort(),
        }),
    }
}

fn as_num(f: &'static str, a: &ArgValue) -> Result<Decimal, ExecError> {
    match a {
        ArgValue::Val(Value::Num(n)) => Ok(*n),
        ArgValue::Val(Value::Obj(c)) => c.as_number().ok_or(ExecError::Sort {
            function: f,
            want: Sort::Num,
            got: Sort::Obj,
        }),
        ArgValue::Val(v) => Err(ExecError::Sort {
            function: f,
            want: Sort::Num,
            got: v.sort(),
        }),
        ArgValue::Col(_) => Err(ExecError::Sort {
            function: f,
            want: Sort::Num,
            got: Sort::Col,
        }),
    }
}

fn as_obj(f: &'static str, a: &ArgValue) -> Result<CellValue, ExecError> {
    match a {
        ArgValue::Val(Value::Obj(c)) => Ok(c.clone()),
        ArgValue::Val(Value::Num(n)) => Ok(cell_from_num(*n)),
        ArgValue::Val(v) => Err(ExecError::Sort {
            function: f,
            want: Sort::Obj,
            got: v.sort(),
        }),
        ArgValue::Col(_) => Err(ExecError::Sort {
            function: f,
            want: Sort::Obj,
            got: Sort::Col,
        }),
    }
}

fn as_bool(f: &'static str, a: &ArgValue) -> Result<bool, ExecError> {
    match a {
        ArgValue::Val(Value::Bool(b)) => Ok(*b),
        ArgValue::Val(v) => Err(ExecError::Sort {
            function: f,
            want: Sort::Bool,
            got: v.sort(),
        }),
        ArgValue::Col(_) => Err(ExecError::Sort {
            function: f,
            want: Sort::Bool,
            got: Sort::Col,
        }),
    }
}

fn numeric_cells(t: &Table, view: &[usize], col: usize) -> Vec<(usize, Decimal)> {
    view.iter()
        .filter_map(|&r| t.cell(r, col).as_number().map(|n| (r, n)))
        .collect()
}

fn filter_rows(
    t: &Table,
    view: &[usize],
    col: usize,
    obj: &CellValue,
    keep: impl Fn(Ordering) -> bool,
) -> Value {
    Value::View(
        view.iter()
            .copied()
            .filter(|&r| keep(compare_cells(t.cell(r, col), obj)))
            .collect(),
    )
}

fn all_rows_match(
    t: &Table,
    view: &[usize],
    col: usize,
    obj: &CellValue,
    keep: impl Fn(Ordering) -> bool,
) -> bool {
    view.iter().all(|&r| keep(compare_cells(t.cell(r, col), obj)))
}

/// Apply one catalog function to evaluated arguments.
pub fn apply(spec: &FunctionSpec, args: &[ArgValue], t: &Table) -> Result<Value, ExecError> {
    if args.len() != spec.arity() {
        return Err(ExecError::Arity {
            name: spec.name.to_string(),
            got: args.len(),
            want: spec.arity(),
        });
    }
    let f = spec.name;
    match f {
        "all_rows" => Ok(Value::View((0..t.n_rows()).collect())),
        "filter_eq" | "filter_not_eq" | "filter_greater" | "filter_less"
        | "filter_greater_eq" | "filter_less_eq" => {
            let view = as_view(f, &args[0])?;
            let col = as_col(f, &args[1])?;
            let obj = as_obj(f, &args[2])?;
            let keep: fn(Ordering) -> bool = match f {
                "filter_eq" => |o| o == Ordering::Equal,
                "filter_not_eq" => |o| o != Ordering::Equal,
                "filter_greater" => |o| o == Ordering::Greater,
                "filter_less" => |o| o == Ordering::Less,
                "filter_greater_eq" => |o| o != Ordering::Less,
                _ => |o| o != Ordering::Greater,
            };
            Ok(filter_rows(t, view, col, &obj, keep))
        }
        "count" => Ok(Value::Num(Decimal::from(as_view(f, &args[0])?.len()))),
        "only" => Ok(Value::Bool(as_view(f, &args[0])?.len() == 1)),
        "first" | "second" => {
            let view = as_view(f, &args[0])?;
            let idx = if f == "first" { 0 } else { 1 };
            match view.get(idx) {
                Some(&r) => Ok(Value::View(vec![r])),
                None => Err(ExecError::Cardinality {
                    function: f,
                    got: view.len(),
                    want: idx + 1,
                }),
            }
        }
        "hop" => {
            let view = as_view(f, &args[0])?;
            let col = as_col(f, &args[1])?;
            match view {
                [] => Err(ExecError::EmptyView { function: f }),
                [r] => Ok(Value::Obj(t.cell(*r, col).clone())),
                _ => Err(ExecError::Cardinality {
                    function: f,
                    got: view.len(),
                    want: 1,
                }),
            }
        }
        "min" | "max" => {
            let view = as_view(f, &args[0])?;
            let col = as_col(f, &args[1])?;
            let nums = numeric_cells(t, view, col);
            let best = nums.iter().map(|(_, n)| *n);
            let out = if f == "min" { best.min() } else { best.max() };
            out.map(Value::Num)
                .ok_or(ExecError::EmptyView { function: f })
        }
        "sum" | "avg" => {
            let view = as_view(f, &args[0])?;
            let col = as_col(f, &args[1])?;
            let nums = numeric_cells(t, view, col);
            let mut total = Decimal::ZERO;
            for (_, n) in &nums {
                total = total
                    .checked_add(*n)
                    .ok_or(ExecError::Numeric { function: f })?;
            }
            if f == "sum" {
                Ok(Value::Num(total))
            } else if nums.is_empty() {
                Err(ExecError::EmptyView { function: f })
            } else {
                total
                    .checked_div(Decimal::from(nums.len()))
                    .map(Value::Num)
                    .ok_or(ExecError::Numeric { function: f })
            }
        }
        "argmax" | "argmin" => {
            let view = as_view(f, &args[0])?;
            let col = as_col(f, &args[1])?;
            let nums = numeric_cells(t, view, col);
            if nums.is_empty() {
                return Err(ExecError::EmptyView { function: f });
            }
            // ties resolve to the lowest row index
            let mut best = nums[0];
            for &(r, n) in &nums[1..] {
                let better = if f == "argmax" { n > best.1 } else { n < best.1 };
                if better {
                    best = (r, n);
                }
            }
            Ok(Value::View(vec![best.0]))
        }
        "eq" | "not_eq" => {
            let a = as_obj(f, &args[0])?;
            let b = as_obj(f, &args[1])?;
            let eq = compare_cells(&a, &b) == Ordering::Equal;
            Ok(Value::Bool(if f == "eq" { eq } else { !eq }))
        }
        "less" | "greater" => {
            let a = as_num(f, &args[0])?;
            let b = as_num(f, &args[1])?;
            Ok(Value::Bool(if f == "less" { a < b } else { a > b }))
        }
        "round_eq" => {
            let a = as_num(f, &args[0])?;
            let b = as_num(f, &args[1])?;
            let diff = a
                .checked_sub(b)
                .ok_or(ExecError::Numeric { function: f })?
                .abs();
            let tol = Decimal::new(1, 2)
                .checked_mul(Decimal::ONE.max(b.abs()))
                .ok_or(ExecError::Numeric { function: f })?;
            Ok(Value::Bool(diff <= tol))
        }
        "within" | "not_within" => {
            let view = as_view(f, &args[0])?;
            let col = as_col(f, &args[1])?;
            let obj = as_obj(f, &args[2])?;
            let found = view
                .iter()
                .any(|&r| compare_cells(t.cell(r, col), &obj) == Ordering::Equal);
            Ok(Value::Bool(if f == "within" { found } else { !found }))
        }
        "all_eq" | "not_all_eq" | "all_greater" | "not_all_greater" | "all_less"
        | "not_all_less" => {
            let view = as_view(f, &args[0])?;
            let col = as_col(f, &args[1])?;
            let obj = as_obj(f, &args[2])?;
            let keep: fn(Ordering) -> bool = match f {
                "all_eq" | "not_all_eq" => |o| o == Ordering::Equal,
                "all_greater" | "not_all_greater" => |o| o == Ordering::Greater,
                _ => |o| o == Ordering::Less,
            };
            let all = all_rows_match(t, view, col, &obj, keep);
            Ok(Value::Bool(if f.starts_with("not_") { !all } else { all }))
        }
        "and" => Ok(Value::Bool(
            as_bool(f, &args[0])? && as_bool(f, &args[1])?,
        )),
        other => Err(ExecError::UnknownFunction {
            name: other.to_string(),
        }),
    }
}

fn resolve_column(t: &Table, name: &str) -> Result<usize, ExecError> {
    match t.column_index(name) {
        Ok(Some(i)) => Ok(i),
        Ok(None) => Err(ExecError::UnresolvedColumn {
            name: name.to_string(),
        }),
        Err(TableError::AmbiguousColumn { name }) => Err(ExecError::AmbiguousColumn { name }),
        Err(_) => Err(ExecError::UnresolvedColumn {
            name: name.to_string(),
        }),
    }
}

fn eval(node: &ProgramNode, t: &Table) -> Result<Value, ExecError> {
    match node {
        ProgramNode::Entity { kind, text } => match kind {
            EntityKind::AllRows => Ok(Value::View((0..t.n_rows()).collect())),
            _ => Ok(Value::Obj(CellValue::new(text.as_str()))),
        },
        ProgramNode::Function { name, children } => {
            let spec = lookup(name).ok_or_else(|| ExecError::UnknownFunction {
                name: name.to_string(),
            })?;
            if children.len() != spec.arity() {
                return Err(ExecError::Arity {
                    name: name.to_string(),
                    got: children.len(),
                    want: spec.arity(),
                });
            }
            let mut args = Vec::with_capacity(children.len());
            for (child, sort) in children.iter().zip(spec.arg_sorts) {
                if *sort == Sort::Col {
                    match child {
                        ProgramNode::Entity { text, kind } if *kind != EntityKind::AllRows => {
                            args.push(ArgValue::Col(resolve_column(t, text)?));
                        }
                        _ => {
                            return Err(ExecError::Sort {
                                function: spec.name,
                                want: Sort::Col,
                                got: match eval(child, t) {
                                    Ok(v) => v.sort(),
                                    Err(e) => return Err(e),
                                },
                            })
                        }
                    }
                } else {
                    args.push(ArgValue::Val(eval(child, t)?));
                }
            }
            apply(spec, &args, t)
        }
    }
}

/// Evaluate a program bottom-up.
pub fn execute(p: &Program, t: &Table) -> Result<Value, ExecError> {
    eval(&p.root, t)
}

/// Evaluate a Bool-rooted program. Errors are discard signals for
/// synthesis, not crashes; the CLI surfaces them as hard errors.
pub fn execute_bool(p: &Program, t: &Table) -> Result<bool, ExecError> {
    match execute(p, t)? {
        Value::Bool(b) => Ok(b),
        v => Err(ExecError::Sort {
            function: "execute_bool",
            want: Sort::Bool,
            got: v.sort(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_program;
    use crate::table::load_table;

    fn fleet_table() -> Table {
        load_table(
            b"bus model#number in fleet#year\nscania#1#1999\nvolvo#12#2001\nman#35#2003",
            '#',
        )
        .unwrap()
    }

    fn run(src: &str, t: &Table) -> Result<Value, ExecError> {
        execute(&parse_program(src).unwrap(), t)
    }

    #[test]
    fn count_all_rows() {
        let t = load_table(b"a\n1\n2\n3\n4\n5", '#').unwrap();
        assert_eq!(run("count { all_rows }", &t), Ok(Value::Num(5.into())));
    }

    #[test]
    fn only_on_singleton() {
        let t = load_table(b"a\nx", '#').unwrap();
        assert_eq!(run("only { all_rows }", &t), Ok(Value::Bool(true)));
    }

    #[test]
    fn min_over_fleet() {
        let t = fleet_table();
        assert_eq!(
            run("eq { min { all_rows ; number in fleet } ; 1 }", &t),
            Ok(Value::Bool(true))
        );
        assert_eq!(
            run("max { all_rows ; number in fleet }", &t),
            Ok(Value::Num(35.into()))
        );
    }

    #[test]
    fn filter_chain_composes() {
        let t = load_table(
            b"date#venue#score\n26 january 2011#sai tso wan#4 - 2\n28 january 2011#mong kok#0 - 0\n26 january 2011#mong kok#1 - 3",
            '#',
        )
        .unwrap();
        // two rows share the date; narrowing by venue leaves one
        assert_eq!(
            run(
                "only { filter_eq { all_rows ; date ; 26 january 2011 } }",
                &t
            ),
            Ok(Value::Bool(false))
        );
        assert_eq!(
            run(
                "only { filter_eq { filter_eq { all_rows ; date ; 26 january 2011 } ; venue ; sai tso wan } }",
                &t
            ),
            Ok(Value::Bool(true))
        );
    }

    #[test]
    fn numeric_filters_against_numbers() {
        let t = fleet_table();
        assert_eq!(
            run("count { filter_greater { all_rows ; number in fleet ; 10 } }", &t),
            Ok(Value::Num(2.into()))
        );
        assert_eq!(
            run(
                "all_greater { filter_greater { all_rows ; number in fleet ; 10 } ; year ; 2000 }",
                &t
            ),
            Ok(Value::Bool(true))
        );
    }

    #[test]
    fn argmax_breaks_ties_low() {
        let t = load_table(b"k#v\na#7\nb#9\nc#9", '#').unwrap();
        assert_eq!(
            run("argmax { all_rows ; v }", &t),
            Ok(Value::View(vec![1]))
        );
        assert_eq!(
            run("hop { argmax { all_rows ; v } ; k }", &t),
            Ok(Value::Obj(CellValue::new("b")))
        );
    }

    #[test]
    fn aggregations_skip_non_numeric() {
        let t = load_table(b"v\n3\nn/a\n5", '#').unwrap();
        assert_eq!(run("sum { all_rows ; v }", &t), Ok(Value::Num(8.into())));
        assert_eq!(run("avg { all_rows ; v }", &t), Ok(Value::Num(4.into())));
        assert_eq!(run("min { all_rows ; v }", &t), Ok(Value::Num(3.into())));
    }

    #[test]
    fn empty_and_undersized_views_error() {
        let t = fleet_table();
        let r = run("min { filter_eq { all_rows ; year ; 1900 } ; year }", &t);
        assert_eq!(r.unwrap_err().class(), "empty_view");
        let r = run("hop { all_rows ; year }", &t);
        assert_eq!(r.unwrap_err().class(), "cardinality");
        let r = run("second { filter_eq { all_rows ; year ; 1999 } }", &t);
        assert_eq!(r.unwrap_err().class(), "cardinality");
    }

    #[test]
    fn execute_bool_discards_errors() {
        let t = fleet_table();
        let p = parse_program("eq { hop { all_rows ; year } ; 1999 }").unwrap();
        assert!(execute_bool(&p, &t).is_err());
        let p = parse_program("and { eq { 1 ; 1 } ; eq { 2 ; 2 } }").unwrap();
        assert_eq!(execute_bool(&p, &t), Ok(true));
        let p = parse_program("not_eq { 1 ; 1 }").unwrap();
        assert_eq!(execute_bool(&p, &t), Ok(false));
    }

    #[test]
    fn unresolved_column_is_reported() {
        let t = fleet_table();
        let r = run("min { all_rows ; horsepower }", &t);
        assert_eq!(r.unwrap_err().class(), "unresolved_column");
    }

    #[test]
    fn round_eq_uses_relative_tolerance() {
        let t = fleet_table();
        assert_eq!(run("round_eq { 100 ; 100.9 }", &t), Ok(Value::Bool(true)));
        assert_eq!(run("round_eq { 100 ; 102 }", &t), Ok(Value::Bool(false)));
        assert_eq!(run("round_eq { 0.999 ; 1 }", &t), Ok(Value::Bool(true)));
    }

    #[test]
    fn text_ordering_is_lexical() {
        // dates stored as text compare lexically
        let t = load_table(b"d\n2011-01-26\n2011-02-01", '#').unwrap();
        assert_eq!(
            run("count { filter_greater { all_rows ; d ; 2011-01-31 } }", &t),
            Ok(Value::Num(1.into()))
        );
    }

    #[test]
    fn complementary_pairs_agree() {
        let t = fleet_table();
        for (pos, neg) in [
            ("eq { 3 ; 4 }", "not_eq { 3 ; 4 }"),
            (
                "within { all_rows ; year ; 2001 }",
                "not_within { all_rows ; year ; 2001 }",
            ),
            (
                "all_eq { all_rows ; year ; 2001 }",
                "not_all_eq { all_rows ; year ; 2001 }",
            ),
            (
                "all_greater { all_rows ; number in fleet ; 0 }",
                "not_all_greater { all_rows ; number in fleet ; 0 }",
            ),
        ] {
            let a = run(pos, &t).unwrap();
            let b = run(neg, &t).unwrap();
            match (a, b) {
                (Value::Bool(x), Value::Bool(y)) => assert_eq!(x, !y, "{pos} vs {neg}"),
                _ => panic!("expected bools"),
            }
        }
    }

    #[test]
    fn value_display_forms() {
        assert_eq!(Value::Bool(true).to_string(), "true");
        assert_eq!(Value::Num("5.10".parse().unwrap()).to_string(), "5.1");
        assert_eq!(Value::View(vec![0, 2]).to_string(), "view { 0 ; 2 }");
        assert_eq!(Value::View(vec![]).to_string(), "view { }");
        assert_eq!(Value::Obj(CellValue::new("a;b")).to_string(), "a\\;b");
    }
}
