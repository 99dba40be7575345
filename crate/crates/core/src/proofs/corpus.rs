//! Shipped proof scripts.

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct CorpusEntry {
    pub name: &'static str,
    /// System name as accepted by [`super::System::parse`].
    pub system: &'static str,
    pub n: Option<u32>,
    /// Expected verdict label.
    pub expected: &'static str,
    #[serde(skip)]
    pub text: &'static str,
}

macro_rules! entry {
    ($name:literal, $system:literal, $n:expr, $expected:literal) => {
        CorpusEntry {
            name: $name,
            system: $system,
            n: $n,
            expected: $expected,
            text: include_str!(concat!("../../../../corpus/", $name, ".prf")),
        }
    };
}

pub const CORPUS: &[CorpusEntry] = &[
    entry!("mp_chain", "AX_closed", None, "verified"),
    entry!("deduction_pair", "AX_closed", None, "verified"),
    entry!("relabel_discharge", "AX", None, "rejected"),
    entry!("distinct_from_fin_2", "AX_2_closed", None, "verified"),
    entry!("distinct_from_fin_3", "AX_3_closed", None, "verified"),
    entry!("sum_equals_from_distinct_2", "AX+Distinct", Some(2), "verified"),
    entry!("sum_equals_from_distinct_3", "AX+Distinct", Some(3), "verified"),
    entry!("fin_from_sum_equals_2", "AX+SumEquals", Some(2), "verified"),
    entry!("fin_from_sum_equals_3", "AX+SumEquals", Some(3), "verified"),
    entry!("sum_eq_2", "AX_2_closed", None, "verified"),
];

pub fn corpus_names() -> Vec<&'static str> {
    CORPUS.iter().map(|e| e.name).collect()
}

pub fn corpus_entry(name: &str) -> Option<&'static CorpusEntry> {
    CORPUS.iter().find(|e| e.name == name)
}
