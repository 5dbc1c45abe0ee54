use super::canon::canonical_string;
use super::Molecule;

/// Bemis–Murcko framework: ring systems plus the linkers joining them.
///
/// Repeatedly strips non-ring atoms with at most one remaining neighbor.
/// What survives is every ring atom and every chain atom lying on a path
/// between two ring atoms. Acyclic molecules yield the empty molecule.
pub fn murcko_scaffold(mol: &Molecule) -> Molecule {
    if mol.rings.is_empty() {
        return Molecule::empty();
    }
    let n = mol.atom_count();
    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|i| mol.degree(i)).collect();
    let mut stack: Vec<usize> = (0..n)
        .filter(|&i| !mol.atoms[i].ring_member && degree[i] <= 1)
        .collect();
    while let Some(u) = stack.pop() {
        if !alive[u] {
            continue;
        }
        alive[u] = false;
        for &(v, _) in mol.neighbors(u) {
            if alive[v] {
                degree[v] -= 1;
                if !mol.atoms[v].ring_member && degree[v] <= 1 {
                    stack.push(v);
                }
            }
        }
    }
    let keep: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
    mol.induced_subgraph(&keep)
}

/// Grouping key for scaffold splits: canonical string of the Murcko
/// framework, `""` for acyclic molecules.
pub fn scaffold_key(mol: &Molecule) -> String {
    canonical_string(&murcko_scaffold(mol))
}
