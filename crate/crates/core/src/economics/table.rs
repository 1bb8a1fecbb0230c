//! Plain-text tables with left-aligned, padded columns.

pub fn text_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count()))).collect();
        let mut s = padded.join("  ").trim_end().to_string();
        s.push('\n');
        s
    };
    let mut out = line(headers.to_vec());
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_align() {
        let t = text_table(&["S", "margin"], &[vec!["{1,2}".into(), "1/2".into()], vec!["{1,2,3}".into(), "0".into()]]);
        assert_eq!(t, "S        margin\n{1,2}    1/2\n{1,2,3}  0\n");
    }
}
