//! Rule files: one `# head: <name>` line per head followed by its rules,
//! one per line, as `confidence<TAB>head(A, B) <- b1(A, z1), b2(z1, B)`.

use std::io::{BufRead, Write};
use std::path::Path;

use super::{Rule, RuleList};
use crate::error::{Error, Result};
use crate::kg::Vocabulary;

fn variable(i: usize, len: usize) -> String {
    match i {
        0 => "A".to_owned(),
        _ if i == len => "B".to_owned(),
        _ => format!("z{i}"),
    }
}

fn name(vocab: &Vocabulary, id: usize) -> std::io::Result<&str> {
    vocab
        .relation_name(id)
        .ok_or_else(|| std::io::Error::other(format!("relation {id} missing from vocabulary")))
}

/// Renders the rule as `head(A, B) <- b1(A, z1), …`.
pub fn render_rule(rule: &Rule, vocab: &Vocabulary) -> std::io::Result<String> {
    let n = rule.body.len();
    let atoms = rule
        .body
        .iter()
        .enumerate()
        .map(|(i, b)| Ok(format!("{}({}, {})", name(vocab, *b)?, variable(i, n), variable(i + 1, n))))
        .collect::<std::io::Result<Vec<_>>>()?;
    Ok(format!("{}(A, B) <- {}", name(vocab, rule.head)?, atoms.join(", ")))
}

pub fn write_rules(rules: &RuleList, vocab: &Vocabulary, mut out: impl Write) -> std::io::Result<()> {
    for (head, group) in rules.iter() {
        writeln!(out, "# head: {}", name(vocab, head)?)?;
        for r in group {
            writeln!(out, "{:.6}\t{}", r.confidence, render_rule(r, vocab)?)?;
        }
    }
    out.flush()
}

fn parse_atoms(text: &str) -> Option<Vec<&str>> {
    let mut names = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let open = rest.find('(')?;
        let close = open + rest[open..].find(')')?;
        names.push(rest[..open].trim());
        rest = rest[close + 1..].trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
    }
    Some(names)
}

/// Parses a rule file written by [`write_rules`]. Confidences come back at
/// the file's six-decimal precision.
pub fn read_rules(reader: impl BufRead, source: &Path, vocab: &Vocabulary) -> Result<RuleList> {
    let mut list = RuleList::new();
    let mut current: Option<(usize, Vec<Rule>)> = None;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.to_path_buf(),
        line,
        message,
    };
    let lookup = |line: usize, n: &str| {
        vocab
            .relation_id(n)
            .ok_or_else(|| parse_err(line, format!("unknown relation `{n}`")))
    };
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        let line = line.trim_end();
        if line.trim().is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix("# head:") {
            if let Some((head, rules)) = current.take() {
                list.set_head(head, rules)?;
            }
            current = Some((lookup(lineno, h.trim())?, Vec::new()));
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let (conf, text) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(lineno, "expected `confidence<TAB>rule`".into()))?;
        let confidence: f64 = conf
            .trim()
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad confidence `{conf}`")))?;
        let (head_text, body_text) = text
            .split_once("<-")
            .ok_or_else(|| parse_err(lineno, "missing `<-`".into()))?;
        let head_atoms = parse_atoms(head_text).filter(|a| a.len() == 1);
        let body_atoms = parse_atoms(body_text).filter(|a| !a.is_empty());
        let (Some(head_atoms), Some(body_atoms)) = (head_atoms, body_atoms) else {
            return Err(parse_err(lineno, "malformed rule".into()));
        };
        let head = lookup(lineno, head_atoms[0])?;
        let body = body_atoms
            .into_iter()
            .map(|a| lookup(lineno, a))
            .collect::<Result<Vec<_>>>()?;
        match &mut current {
            Some((h, rules)) if *h == head => rules.push(Rule::new(head, body, confidence)),
            _ => return Err(parse_err(lineno, "rule does not match the current `# head:` section".into())),
        }
    }
    if let Some((head, rules)) = current {
        list.set_head(head, rules)?;
    }
    Ok(list)
}
