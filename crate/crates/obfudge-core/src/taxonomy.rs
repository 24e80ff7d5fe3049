//! Registry of the 19 obfuscation techniques and the 12 combo groupings.
//!
//! Instructions are the exact natural-language directives used to drive
//! LLM-mode obfuscation; deterministic mode implements the same directives
//! as source-to-source passes.

use crate::error::TaxonomyError;
use crate::lang::Language;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TechniqueId {
    L1, L2, L3, L4, L5, L6, L7, L8,
    D1, D2, D3, D4, D5, D6, D7, D8,
    C1, C2, C3,
}

impl TechniqueId {
    pub fn all() -> &'static [TechniqueId] {
        use TechniqueId::*;
        &[L1, L2, L3, L4, L5, L6, L7, L8, D1, D2, D3, D4, D5, D6, D7, D8, C1, C2, C3]
    }

    pub fn category(self) -> Category {
        use TechniqueId::*;
        match self {
            L1 | L2 | L3 | L4 | L5 | L6 | L7 | L8 => Category::Layout,
            D1 | D2 | D3 | D4 | D5 | D6 | D7 | D8 => Category::Dataflow,
            C1 | C2 | C3 => Category::Controlflow,
        }
    }

    pub fn as_str(self) -> &'static str {
        use TechniqueId::*;
        match self {
            L1 => "L1", L2 => "L2", L3 => "L3", L4 => "L4", L5 => "L5", L6 => "L6",
            L7 => "L7", L8 => "L8", D1 => "D1", D2 => "D2", D3 => "D3", D4 => "D4",
            D5 => "D5", D6 => "D6", D7 => "D7", D8 => "D8", C1 => "C1", C2 => "C2",
            C3 => "C3",
        }
    }
}

impl fmt::Display for TechniqueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TechniqueId {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        TechniqueId::all()
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Layout,
    Dataflow,
    Controlflow,
}

#[derive(Debug, Clone, Serialize)]
pub struct Technique {
    pub id: TechniqueId,
    pub category: Category,
    pub name: &'static str,
    /// Verbatim natural-language directive from the combo-instruction table.
    pub instruction: &'static str,
    /// Languages the technique applies to, per the instruction's own caveats.
    pub languages: &'static [Language],
}

impl Technique {
    pub fn applies_to(&self, language: Language) -> bool {
        self.languages.contains(&language)
    }
}

#[derive(Debug, Clone)]
pub struct Combo {
    /// Combo id as it appears in the result tables, e.g. "L4+L5+L6".
    pub id: &'static str,
    pub techniques: Vec<TechniqueId>,
}

impl Combo {
    /// Newline-joined instructions of member techniques, in technique order.
    pub fn instruction_block(&self) -> String {
        self.techniques
            .iter()
            .map(|id| technique(*id).instruction)
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn applies_to(&self, language: Language) -> bool {
        self.techniques.iter().any(|id| technique(*id).applies_to(language))
    }
}

const ALL_LANGS: &[Language] = &[Language::Solidity, Language::C, Language::Cpp, Language::Python];

fn build_techniques() -> Vec<Technique> {
    use Language::*;
    use TechniqueId::*;
    let mk = |id: TechniqueId, name: &'static str, instruction: &'static str, languages: &'static [Language]| Technique {
        id,
        category: id.category(),
        name,
        instruction,
        languages,
    };
    vec![
        mk(L1, "Identifier Deletion",
           "Delete names of identifiers in the code, including function names, variable names, class names, and method names. Replace them with hashed names, like OX7B4DF339.",
           ALL_LANGS),
        mk(L2, "Comment Deletion",
           "Delete all comments in the code, including docstrings.",
           ALL_LANGS),
        mk(L3, "Formatting Obfuscation",
           "Change code formatting to make the code less readable, e.g., remove or add whitespaces, indentation, line breaks, and line continuations.",
           ALL_LANGS),
        mk(L4, "For-to-While Transformation",
           "Replace for-loops with while-loops or do-while-loops, or replace do-while-loops/while-loops with for-loops.",
           ALL_LANGS),
        mk(L5, "If-to-Switch Transformation",
           "Replace if-else with switch in C++; replace case with if-else in Python.",
           &[C, Cpp, Python]),
        mk(L6, "Loop-to-Recursion Transformation",
           "Replace all loops with recursion if possible in C++/Python/Solidity.",
           &[Cpp, Python, Solidity]),
        mk(L7, "Mix-Language with Inline Assembly",
           "Replace single programming language with mixed languages, e.g., use C/C++ and inline assembly, or Solidity with inline assembly.",
           &[C, Cpp, Solidity]),
        mk(L8, "Mix-Language with External Calls",
           "Replace single programming language with mixed languages, e.g., use Python with C/C++ by loading C DLL.",
           &[Python]),
        mk(D1, "Arithmetic Substitution",
           "Replace arithmetic constants with equivalent expressions, e.g., a=1 -> a=(999-900)/99+0*250.",
           ALL_LANGS),
        mk(D2, "Boolean Substitution",
           "Replace boolean constants with equivalent expressions, e.g., a=True -> a=(1==2)||(not False||True||1==1).",
           ALL_LANGS),
        mk(D3, "String Substitution",
           "Replace string constants with equivalent concatenations, e.g., a='hello' -> a='h'+'e'+'llo'.",
           ALL_LANGS),
        mk(D4, "Data Aggregation",
           "Aggregate scalars into vectors/structs, e.g., a=1,b=2,c=3 -> v=[1,2,3].",
           ALL_LANGS),
        mk(D5, "Data Splitting",
           "Split vectors/structs into scalars, e.g., v=[1,2,3] -> a=v[0], b=v[1], c=v[2].",
           ALL_LANGS),
        mk(D6, "Change Member Order",
           "Change the order of struct members, e.g., struct S{int a; bool b;} -> struct S{bool b; int a;}.",
           ALL_LANGS),
        mk(D7, "Change Variable Scope",
           "Change scope of variables, e.g., block -> local, local -> global.",
           ALL_LANGS),
        mk(D8, "Static-to-Dynamic Access",
           "Replace static variable access with dynamic retrieval, e.g., a=1 -> a=getValueA().",
           ALL_LANGS),
        mk(C1, "Add Opaque Predicates",
           "Insert opaque predicates and junk code into control flow, using meaningful names without indicating junk.",
           ALL_LANGS),
        mk(C2, "Control Flow Flattening",
           "Apply control flow flattening, encapsulating blocks in a dispatcher-controlled loop with switch-like/if-else jumps.",
           ALL_LANGS),
        mk(C3, "Virtualization",
           "Rewrite code using a stack-based virtual machine, replacing original logic with custom bytecode executed by a VM interpreter.",
           ALL_LANGS),
    ]
}

/// The 12 combo rows of the result tables, in table order.
pub const COMBO_IDS: &[&str] = &[
    "L1", "L2", "L3", "L4+L5+L6", "L7", "L8", "D1+D2+D3", "D4+D5+D6+D7", "D8", "C1", "C2", "C3",
];

fn build_combos() -> Vec<Combo> {
    COMBO_IDS
        .iter()
        .map(|id| Combo {
            id,
            techniques: id
                .split('+')
                .map(|part| TechniqueId::from_str(part).expect("combo member id"))
                .collect(),
        })
        .collect()
}

struct Registry {
    techniques: Vec<Technique>,
    combos: Vec<Combo>,
}

fn registry() -> &'static Registry {
    static REGISTRY: OnceLock<Registry> = OnceLock::new();
    REGISTRY.get_or_init(|| Registry {
        techniques: build_techniques(),
        combos: build_combos(),
    })
}

/// All 19 techniques sorted by id.
pub fn list_techniques() -> &'static [Technique] {
    &registry().techniques
}

pub fn technique(id: TechniqueId) -> &'static Technique {
    registry()
        .techniques
        .iter()
        .find(|t| t.id == id)
        .expect("registry holds every technique id")
}

/// All 12 combos in result-table order.
pub fn list_combos() -> &'static [Combo] {
    &registry().combos
}

pub fn resolve_combo(combo_id: &str) -> Result<&'static Combo, TaxonomyError> {
    registry()
        .combos
        .iter()
        .find(|c| c.id == combo_id)
        .ok_or_else(|| TaxonomyError::UnknownCombo(combo_id.to_string()))
}

/// One machine-readable export record per technique.
#[derive(Debug, Serialize)]
pub struct TechniqueRecord {
    pub id: String,
    pub category: Category,
    pub name: String,
    pub instruction: String,
    pub languages: Vec<String>,
}

pub fn export_records() -> Vec<TechniqueRecord> {
    list_techniques()
        .iter()
        .map(|t| TechniqueRecord {
            id: t.id.to_string(),
            category: t.category,
            name: t.name.to_string(),
            instruction: t.instruction.to_string(),
            languages: t.languages.iter().map(|l| l.name().to_string()).collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn nineteen_techniques_with_unique_ids() {
        let all = list_techniques();
        assert_eq!(all.len(), 19);
        let ids: BTreeSet<_> = all.iter().map(|t| t.id).collect();
        assert_eq!(ids.len(), 19);
        // sorted by id
        let mut sorted = all.to_vec();
        sorted.sort_by_key(|t| t.id);
        assert!(all.iter().zip(sorted.iter()).all(|(a, b)| a.id == b.id));
    }

    #[test]
    fn categories_follow_id_prefix() {
        for t in list_techniques() {
            let expected = match t.id.as_str().chars().next().unwrap() {
                'L' => Category::Layout,
                'D' => Category::Dataflow,
                'C' => Category::Controlflow,
                _ => unreachable!(),
            };
            assert_eq!(t.category, expected, "{}", t.id);
            assert!(!t.instruction.is_empty());
        }
    }

    #[test]
    fn l1_is_layout_and_c3_mentions_vm() {
        assert_eq!(technique(TechniqueId::L1).category, Category::Layout);
        assert!(technique(TechniqueId::C3).instruction.contains("stack-based virtual machine"));
    }

    #[test]
    fn twelve_combos_partition_the_techniques() {
        let combos = list_combos();
        assert_eq!(combos.len(), 12);
        let mut seen = BTreeSet::new();
        for combo in combos {
            for id in &combo.techniques {
                assert!(seen.insert(*id), "{} appears in two combos", id);
            }
        }
        assert_eq!(seen.len(), 19);
    }

    #[test]
    fn resolve_combo_contract() {
        let c = resolve_combo("L4+L5+L6").unwrap();
        assert_eq!(c.techniques, vec![TechniqueId::L4, TechniqueId::L5, TechniqueId::L6]);
        let single = resolve_combo("L1").unwrap();
        assert_eq!(single.techniques, vec![TechniqueId::L1]);
        assert!(matches!(resolve_combo("L9"), Err(TaxonomyError::UnknownCombo(_))));
    }

    #[test]
    fn instruction_block_contents() {
        let d = resolve_combo("D1+D2+D3").unwrap();
        let block = d.instruction_block();
        assert!(block.contains("Replace arithmetic constants with equivalent expressions"));
        assert_eq!(block.lines().count(), 3);

        let l2 = resolve_combo("L2").unwrap();
        assert_eq!(l2.instruction_block(), technique(TechniqueId::L2).instruction);

        let c1 = resolve_combo("C1").unwrap();
        assert!(c1.instruction_block().contains("Insert opaque predicates and junk code"));
    }

    #[test]
    fn instruction_block_is_stable() {
        let c = resolve_combo("D4+D5+D6+D7").unwrap();
        assert_eq!(c.instruction_block(), c.instruction_block());
    }

    #[test]
    fn language_restrictions_follow_instruction_text() {
        use Language::*;
        assert!(!technique(TechniqueId::L5).applies_to(Solidity));
        assert!(!technique(TechniqueId::L6).applies_to(C));
        assert!(!technique(TechniqueId::L7).applies_to(Python));
        assert!(technique(TechniqueId::L8).languages == [Python]);
    }
}
