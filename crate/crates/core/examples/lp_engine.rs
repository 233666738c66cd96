//! The dense dual simplex on a toy LP, then a warm-started re-solve after
//! adding a row.

use kpart::simplex::{duality_residual, solve_lp, LinearProgram, Relation, Row};

fn main() {
    // min -x - 2y  s.t. x + y <= 1.5, 0 <= x, y <= 1
    let mut lp = LinearProgram::new(vec![-1.0, -2.0], vec![0.0; 2], vec![1.0; 2]).unwrap();
    lp.add_row(Row::new(vec![(0, 1.0), (1, 1.0)], Relation::Le, 1.5)).unwrap();
    let first = solve_lp(&lp, None).unwrap();
    println!("{:?} {} at {:?}, duals {:?}", first.status, first.objective, first.x, first.duals);

    lp.add_row(Row::new(vec![(0, 1.0), (1, -1.0)], Relation::Ge, 0.0)).unwrap();
    let second = solve_lp(&lp, Some(&first.basis)).unwrap();
    let (gap, sign) = duality_residual(&lp, &second);
    println!(
        "{:?} {} at {:?} after {} pivots; duality gap {gap:.1e}, sign error {sign:.1e}",
        second.status, second.objective, second.x, second.iterations
    );
}
