//! Prompt rendering from the versioned templates under `assets/prompts`.

use adversim_core::identifier::ScoreProgram;

use crate::agents::Memory;

pub const VERSION: &str = "v1";

const SYSTEM: &str = include_str!("../assets/prompts/v1/system.txt");
const BACKGROUND: &str = include_str!("../assets/prompts/v1/background.txt");
const INIT: &str = include_str!("../assets/prompts/v1/init.txt");
const REFLECTION: &str = include_str!("../assets/prompts/v1/reflection.txt");
const MODIFICATION: &str = include_str!("../assets/prompts/v1/modification.txt");

/// Added to reflection and modification prompts in local-optimization mode.
pub const MINOR_ONLY_CLAUSE: &str = "Restriction: change numeric coefficients only. Keep every operator, \
function and feature of the current function exactly as it is.";

pub fn system() -> &'static str {
    SYSTEM
}

fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{{{k}}}}}"), v);
    }
    out
}

fn minor(minor_only: bool) -> String {
    if minor_only {
        format!("{MINOR_ONLY_CLAUSE}\n")
    } else {
        String::new()
    }
}

pub fn init() -> String {
    fill(INIT, &[("background", BACKGROUND.trim_end())])
}

/// Renders the memory transcript; empty memory renders nothing.
pub fn memory_section(memory: &Memory) -> String {
    if memory.entries.is_empty() {
        return String::new();
    }
    let mut s = String::from("\n## Previous functions\n");
    for (i, e) in memory.entries.iter().enumerate() {
        s.push_str(&format!(
            "Function {i} (success rate {:.4}):\n```dsl\n{}\n```\n",
            e.success_rate, e.program
        ));
    }
    s
}

pub fn reflection(memory: &Memory, f: &ScoreProgram, rate: f64, minor_only: bool) -> String {
    fill(
        REFLECTION,
        &[
            ("background", BACKGROUND.trim_end()),
            ("memory", &memory_section(memory)),
            ("rate", &format!("{rate:.4}")),
            ("function", &f.pretty()),
            ("minor_only", &minor(minor_only)),
        ],
    )
}

pub fn modification(f: &ScoreProgram, suggestion: &str, minor_only: bool) -> String {
    fill(
        MODIFICATION,
        &[
            ("background", BACKGROUND.trim_end()),
            ("function", &f.pretty()),
            ("suggestion", suggestion.trim()),
            ("minor_only", &minor(minor_only)),
        ],
    )
}
