//! Text format for abstraction hierarchies.
//!
//! ```text
//! levels 2
//! level 0
//! goal goal
//! rule 1 X(1) <-
//! rule 1 goal <- X(1) Y(1)
//! map X(1) X
//! map Y(1) Y
//! map goal goal
//! level 1
//! goal goal
//! rule 1 X <-
//! ...
//! ```
//!
//! `map` lines inside the `level k` block send level-`k` statements to
//! level-`k+1` statements; every statement of a non-top level must be
//! mapped.

use std::collections::HashMap;

use anyhow::{anyhow, bail, Result};
use lightest::abstraction::AbstractionMap;
use lightest::hald::Hierarchy;
use lightest::Problem;

type Key = (String, Vec<i32>);

fn parse_key(tok: &str) -> Result<Key> {
    let tok = tok.trim();
    match tok.split_once('(') {
        None => Ok((tok.to_string(), Vec::new())),
        Some((label, rest)) => {
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| anyhow!("unbalanced parens in `{tok}`"))?;
            let mut args = Vec::new();
            if !inner.trim().is_empty() {
                for part in inner.split(',') {
                    args.push(part.trim().parse()?);
                }
            }
            Ok((label.to_string(), args))
        }
    }
}

pub fn parse(text: &str) -> Result<Hierarchy> {
    let mut level_texts: Vec<Vec<&str>> = Vec::new();
    let mut declared = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("levels ") {
            declared = Some(rest.trim().parse::<usize>()?);
        } else if let Some(rest) = line.strip_prefix("level ") {
            let k: usize = rest.trim().parse()?;
            if k != level_texts.len() {
                bail!("level {k} out of order");
            }
            level_texts.push(Vec::new());
        } else {
            level_texts
                .last_mut()
                .ok_or_else(|| anyhow!("line before the first `level` header: `{line}`"))?
                .push(line);
        }
    }
    if let Some(m) = declared {
        if m != level_texts.len() {
            bail!("declared {m} levels, found {}", level_texts.len());
        }
    }
    if level_texts.is_empty() {
        bail!("no levels");
    }

    let mut problems = Vec::new();
    let mut map_tables: Vec<HashMap<Key, Key>> = Vec::new();
    for lines in &level_texts {
        let mut problem_text = String::new();
        let mut table = HashMap::new();
        for line in lines {
            if let Some(rest) = line.strip_prefix("map ") {
                let mut parts = rest.split_whitespace();
                let from = parse_key(parts.next().ok_or_else(|| anyhow!("map needs two keys"))?)?;
                let to = parse_key(parts.next().ok_or_else(|| anyhow!("map needs two keys"))?)?;
                table.insert(from, to);
            } else {
                problem_text.push_str(line);
                problem_text.push('\n');
            }
        }
        problems.push(Problem::from_text(&problem_text)?);
        map_tables.push(table);
    }

    let m = problems.len();
    // every statement of levels 0..m-1 must be mapped
    for (k, table) in map_tables.iter().enumerate().take(m - 1) {
        let reg = problems[k].registry();
        for s in reg.statements() {
            let key = (reg.label(s).to_string(), reg.args(s).to_vec());
            if !table.contains_key(&key) {
                bail!("level {k}: statement {} is not mapped", reg.display(s));
            }
        }
    }
    let maps = map_tables
        .into_iter()
        .take(m - 1)
        .map(AbstractionMap::from_table)
        .collect();
    Ok(Hierarchy::new(problems, maps)?)
}
