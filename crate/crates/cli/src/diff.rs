//! Token-level edit marks between a source and a candidate.

/// `[-x-]` for deleted and `{+y+}` for inserted tokens, from a longest
/// common subsequence alignment.
pub fn mark_edits(a: &[String], b: &[String]) -> String {
    let (n, m) = (a.len(), b.len());
    let mut lcs = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i][j] = if a[i] == b[j] {
                lcs[i + 1][j + 1] + 1
            } else {
                lcs[i + 1][j].max(lcs[i][j + 1])
            };
        }
    }
    let mut out = String::new();
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        if i < n && j < m && a[i] == b[j] {
            out.push_str(&a[i]);
            i += 1;
            j += 1;
        } else if j < m && (i == n || lcs[i][j + 1] >= lcs[i + 1][j]) {
            out.push_str(&format!("{{+{}+}}", b[j]));
            j += 1;
        } else {
            out.push_str(&format!("[-{}-]", a[i]));
            i += 1;
        }
    }
    out
}
