//! The fixed function catalog of the logical-form grammar.

use std::collections::HashMap;
use std::sync::OnceLock;

/// Value sorts used to type function signatures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sort {
    View,
    Row,
    Num,
    Obj,
    Bool,
    Col,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

/// Signature of one catalog function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSpec {
    pub name: &'static str,
    pub arg_sorts: &'static [Sort],
    pub return_sort: Sort,
    pub polarity: Polarity,
}

impl FunctionSpec {
    pub fn arity(&self) -> usize {
        self.arg_sorts.len()
    }
}

use Polarity::{Negative, Positive};
use Sort::{Bool, Col, Num, Obj, View};

const VIEW_COL_OBJ: &[Sort] = &[View, Col, Obj];
const VIEW_COL: &[Sort] = &[View, Col];
const VIEW1: &[Sort] = &[View];
const OBJ2: &[Sort] = &[Obj, Obj];
const NUM2: &[Sort] = &[Num, Num];
const BOOL2: &[Sort] = &[Bool, Bool];

macro_rules! spec {
    ($name:literal, $args:expr, $ret:expr, $pol:expr) => {
        FunctionSpec {
            name: $name,
            arg_sorts: $args,
            return_sort: $ret,
            polarity: $pol,
        }
    };
}

/// Catalog in stable order. Names are unique; `all_rows` is listed for
/// lookup but parses as an entity, not a function call.
static CATALOG: &[FunctionSpec] = &[
    spec!("all_rows", &[], View, Positive),
    spec!("filter_eq", VIEW_COL_OBJ, View, Positive),
    spec!("filter_not_eq", VIEW_COL_OBJ, View, Negative),
    spec!("filter_greater", VIEW_COL_OBJ, View, Positive),
    spec!("filter_less", VIEW_COL_OBJ, View, Positive),
    spec!("filter_greater_eq", VIEW_COL_OBJ, View, Positive),
    spec!("filter_less_eq", VIEW_COL_OBJ, View, Positive),
    spec!("count", VIEW1, Num, Positive),
    spec!("only", VIEW1, Bool, Positive),
    spec!("first", VIEW1, View, Positive),
    spec!("second", VIEW1, View, Positive),
    spec!("hop", VIEW_COL, Obj, Positive),
    spec!("min", VIEW_COL, Num, Positive),
    spec!("max", VIEW_COL, Num, Positive),
    spec!("sum", VIEW_COL, Num, Positive),
    spec!("avg", VIEW_COL, Num, Positive),
    spec!("argmax", VIEW_COL, View, Positive),
    spec!("argmin", VIEW_COL, View, Positive),
    spec!("eq", OBJ2, Bool, Positive),
    spec!("not_eq", OBJ2, Bool, Negative),
    spec!("less", NUM2, Bool, Positive),
    spec!("greater", NUM2, Bool, Positive),
    spec!("round_eq", NUM2, Bool, Positive),
    spec!("within", VIEW_COL_OBJ, Bool, Positive),
    spec!("not_within", VIEW_COL_OBJ, Bool, Negative),
    spec!("all_eq", VIEW_COL_OBJ, Bool, Positive),
    spec!("not_all_eq", VIEW_COL_OBJ, Bool, Negative),
    spec!("all_greater", VIEW_COL_OBJ, Bool, Positive),
    spec!("not_all_greater", VIEW_COL_OBJ, Bool, Negative),
    spec!("all_less", VIEW_COL_OBJ, Bool, Positive),
    spec!("not_all_less", VIEW_COL_OBJ, Bool, Negative),
    spec!("and", BOOL2, Bool, Positive),
];

/// The full catalog in stable order.
pub fn catalog() -> &'static [FunctionSpec] {
    CATALOG
}

fn index() -> &'static HashMap<&'static str, &'static FunctionSpec> {
    static INDEX: OnceLock<HashMap<&'static str, &'static FunctionSpec>> = OnceLock::new();
    INDEX.get_or_init(|| CATALOG.iter().map(|s| (s.name, s)).collect())
}

pub fn lookup(name: &str) -> Option<&'static FunctionSpec> {
    index().get(name).copied()
}

/// Function names carrying negative meaning; retrieval filters on these.
pub fn negative_functions() -> impl Iterator<Item = &'static str> {
    CATALOG
        .iter()
        .filter(|s| s.polarity == Negative)
        .map(|s| s.name)
}
