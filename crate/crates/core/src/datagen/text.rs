//! Prompt and reasoning text for sampled scenes.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::template::{RelationRule, SceneTemplate};

pub(crate) struct PlacedObject {
    pub key: String,
    pub cell: (usize, usize),
    pub yaw: i32,
    pub tops: Vec<String>,
}

pub(crate) struct Text {
    pub prompt: String,
    pub reasoning: String,
}

pub(crate) fn noun(key: &str) -> String {
    key.replace('_', " ")
}

fn plural(name: &str) -> String {
    if let Some(stem) = name.strip_suffix("shelf") {
        format!("{stem}shelves")
    } else if name.ends_with('s') || name.ends_with("ch") || name.ends_with("sh") {
        format!("{name}es")
    } else {
        format!("{name}s")
    }
}

fn counted(n: usize, key: &str) -> String {
    const WORDS: [&str; 9] = ["two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"];
    let name = noun(key);
    match n {
        1 if name.starts_with(['a', 'e', 'i', 'o', 'u']) => format!("an {name}"),
        1 => format!("a {name}"),
        2..=10 => format!("{} {}", WORDS[n - 2], plural(&name)),
        _ => format!("{n} {}", plural(&name)),
    }
}

fn join_list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

/// Groups keys by first appearance: `["vase", "cup", "vase"]` reads as
/// "two vases and a cup".
fn tally<'a>(keys: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut groups: Vec<(&str, usize)> = Vec::new();
    for k in keys {
        match groups.iter_mut().find(|(g, _)| *g == k) {
            Some((_, n)) => *n += 1,
            None => groups.push((k, 1)),
        }
    }
    groups.into_iter().map(|(k, n)| counted(n, k)).collect()
}

fn objects_phrase(placed: &[PlacedObject]) -> String {
    let mut keys: Vec<&str> = Vec::new();
    for p in placed {
        if !keys.contains(&p.key.as_str()) {
            keys.push(&p.key);
        }
    }
    let parts: Vec<String> = keys
        .iter()
        .map(|k| {
            let same: Vec<&PlacedObject> = placed.iter().filter(|p| p.key == *k).collect();
            let base = counted(same.len(), k);
            let tops = tally(same.iter().flat_map(|p| p.tops.iter().map(String::as_str)));
            if tops.is_empty() {
                base
            } else {
                format!("{base} with {} on top", join_list(&tops))
            }
        })
        .collect();
    join_list(&parts)
}

pub(crate) fn rule_sentence(r: &RelationRule) -> String {
    format!("the {} {} the {}", noun(&r.subject), r.relation.phrase(), noun(&r.object))
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn steps(placed: &[PlacedObject]) -> String {
    placed
        .iter()
        .enumerate()
        .map(|(n, p)| {
            let mut s = format!(
                "Step {}: put the {} in cell ({},{}) turned {} degrees",
                n + 1,
                noun(&p.key),
                p.cell.0,
                p.cell.1,
                p.yaw
            );
            if !p.tops.is_empty() {
                s.push_str(&format!(" and set {} on its top", join_list(&tally(p.tops.iter().map(String::as_str)))));
            }
            s.push('.');
            s
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut s = template.to_string();
    for (k, v) in vars {
        s = s.replace(&format!("{{{k}}}"), v);
    }
    capitalize(&s.split_whitespace().collect::<Vec<_>>().join(" "))
}

pub(crate) fn describe(t: &SceneTemplate, placed: &[PlacedObject], rules: &[RelationRule], rng: &mut ChaCha8Rng) -> Text {
    let adjective = t.adjectives.choose(rng).map_or("simple", String::as_str).to_string();
    let prompt_t = t.prompts.choose(rng).expect("checked non-empty");
    let reasoning_t = t.reasoning.choose(rng).expect("checked non-empty");
    let relations = rules
        .iter()
        .map(|r| format!("{}.", capitalize(&rule_sentence(r))))
        .collect::<Vec<_>>()
        .join(" ");
    let constraints = if rules.is_empty() {
        "There are no relational constraints.".to_string()
    } else {
        let list: Vec<String> = rules.iter().map(rule_sentence).collect();
        format!("Constraints: {}.", list.join("; "))
    };
    let size = format!("{}m x {}m", t.rows as f64 * t.cell_size_m, t.cols as f64 * t.cell_size_m);
    let grid = format!("{}x{}", t.rows, t.cols);
    let count = placed.len().to_string();
    let objects = objects_phrase(placed);
    let steps = steps(placed);
    let vars = [
        ("adjective", adjective.as_str()),
        ("room", t.room.as_str()),
        ("objects", objects.as_str()),
        ("relations", relations.as_str()),
        ("size", size.as_str()),
        ("count", count.as_str()),
        ("grid", grid.as_str()),
        ("constraints", constraints.as_str()),
        ("steps", steps.as_str()),
    ];
    Text {
        prompt: fill(prompt_t, &vars),
        reasoning: fill(reasoning_t, &vars),
    }
}
