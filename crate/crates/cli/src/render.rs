use std::io::IsTerminal;

use adaptsel::selector::round_half_even;

/// Color only on a terminal, and never when `NO_COLOR` is set.
pub fn color_enabled() -> bool {
    std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty()) && std::io::stdout().is_terminal()
}

pub fn pct(fraction: f64) -> String {
    format!("{:.2}", round_half_even(fraction * 100.0, 2))
}

pub fn usd(value: f64) -> String {
    format!("{:.3}", round_half_even(value, 3))
}

pub fn opt<T>(value: Option<T>, f: impl Fn(T) -> String) -> String {
    value.map_or_else(|| "-".to_string(), f)
}

/// Plain aligned table: text columns left, everything else right.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    left: usize,
}

impl Table {
    /// `left` is how many leading columns are left-aligned.
    pub fn new(header: &[&str], left: usize) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            left,
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self, color: bool) -> String {
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, &w))| if i < self.left { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            parts.join("  ").trim_end().to_string()
        };
        let mut out = String::new();
        let head = line(&self.header);
        if color {
            out.push_str(&format!("\x1b[1m{head}\x1b[0m\n"));
        } else {
            out.push_str(&head);
            out.push('\n');
        }
        let rule: usize = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
        out.push_str(&"-".repeat(rule));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats() {
        assert_eq!(pct(0.9438), "94.38");
        assert_eq!(pct(0.004), "0.40");
        assert_eq!(usd(13.3045), "13.304");
        assert_eq!(opt(None::<f64>, usd), "-");
    }

    #[test]
    fn aligned() {
        let mut t = Table::new(&["name", "value"], 1);
        t.push(vec!["a".into(), "1.00".into()]);
        t.push(vec!["long".into(), "10.00".into()]);
        let s = t.render(false);
        assert_eq!(s, "name  value\n-----------\na      1.00\nlong  10.00\n");
    }
}
