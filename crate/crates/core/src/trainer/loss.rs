//! Listwise distillation loss.
//!
//! For every ordered candidate pair the teacher ranks strictly
//! (`t_a > t_b`), the loss contributes
//!
//! ```text
//! |1/pi(a) - 1/pi(b)| * ln(1 + exp(y_b - y_a))
//! ```
//!
//! where `pi` is the candidate's 1-based rank under the *student* scores and
//! `y` the student scores themselves. Rank-dependent pair weights are
//! treated as constants within a step (they are recomputed each step), so
//! the gradient flows only through the logistic term.
//!
//! In-batch negatives carry `-inf` as their teacher score: the strict
//! indicator then lets them appear only on the non-relevant side of a pair
//! and never pairs two of them together.

use crate::error::{Error, Result};
use crate::trainer::encoder::softplus;

/// 1-based ranks induced by scores, descending; ties keep candidate order.
pub fn ranks_from_scores(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut ranks = vec![0usize; scores.len()];
    for (rank, &idx) in order.iter().enumerate() {
        ranks[idx] = rank + 1;
    }
    ranks
}

fn validate_ranks(ranks: &[usize]) -> Result<()> {
    let n = ranks.len();
    let mut seen = vec![false; n + 1];
    for &r in ranks {
        if r == 0 || r > n || seen[r] {
            return Err(Error::NotAPermutation(n));
        }
        seen[r] = true;
    }
    Ok(())
}

/// One teacher-ordered pair `(winner, loser)` with its rank weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaPair {
    pub winner: usize,
    pub loser: usize,
    pub weight: f64,
}

/// Enumerate teacher-ordered pairs and their current rank weights.
pub fn lambda_pairs(teacher_scores: &[f64], student_ranks: &[usize]) -> Vec<LambdaPair> {
    let n = teacher_scores.len();
    let mut pairs = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && teacher_scores[a] > teacher_scores[b] {
                let weight =
                    (1.0 / student_ranks[a] as f64 - 1.0 / student_ranks[b] as f64).abs();
                pairs.push(LambdaPair {
                    winner: a,
                    loser: b,
                    weight,
                });
            }
        }
    }
    pairs
}

/// Loss value for a fixed pair set; the finite-difference oracle evaluates
/// this with weights frozen at the base point.
pub fn loss_from_scores(student_scores: &[f64], pairs: &[LambdaPair]) -> f64 {
    pairs
        .iter()
        .map(|p| p.weight * softplus(1.0, student_scores[p.loser] - student_scores[p.winner]))
        .sum()
}

/// Listwise distillation loss for one candidate list.
pub fn distill_loss(
    student_scores: &[f64],
    teacher_scores: &[f64],
    student_ranks: &[usize],
) -> Result<f64> {
    if student_scores.len() != teacher_scores.len() {
        return Err(Error::LengthMismatch {
            left: student_scores.len(),
            right: teacher_scores.len(),
        });
    }
    if student_scores.len() != student_ranks.len() {
        return Err(Error::LengthMismatch {
            left: student_scores.len(),
            right: student_ranks.len(),
        });
    }
    if student_scores.len() < 2 {
        return Err(Error::TooFewItems {
            required: 2,
            actual: student_scores.len(),
        });
    }
    validate_ranks(student_ranks)?;
    Ok(loss_from_scores(
        student_scores,
        &lambda_pairs(teacher_scores, student_ranks),
    ))
}

/// Loss plus its gradient with respect to the student scores, pair weights
/// held constant.
pub(crate) fn loss_and_score_grads(
    student_scores: &[f64],
    pairs: &[LambdaPair],
) -> (f64, Vec<f64>) {
    let mut loss = 0.0;
    let mut grads = vec![0.0; student_scores.len()];
    for p in pairs {
        let z = student_scores[p.loser] - student_scores[p.winner];
        loss += p.weight * softplus(1.0, z);
        // d/dz ln(1+e^z) = logistic(z)
        let sig = crate::trainer::encoder::softplus_grad(1.0, z);
        grads[p.winner] -= p.weight * sig;
        grads[p.loser] += p.weight * sig;
    }
    (loss, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn ranks_break_ties_by_candidate_order() {
        assert_eq!(ranks_from_scores(&[2.0, 1.0]), vec![1, 2]);
        assert_eq!(ranks_from_scores(&[1.0, 2.0]), vec![2, 1]);
        assert_eq!(ranks_from_scores(&[1.0, 1.0, 2.0]), vec![2, 3, 1]);
    }

    #[test]
    fn tied_teachers_produce_zero_loss() {
        let student = [3.0, 1.0, 2.0];
        let teacher = [1.0, 1.0, 1.0];
        let ranks = ranks_from_scores(&student);
        assert_eq!(distill_loss(&student, &teacher, &ranks).unwrap(), 0.0);
    }

    #[test]
    fn worked_two_candidate_agreeing_student() {
        let student = [2.0, 1.0];
        let teacher = [10.0, 5.0];
        let ranks = ranks_from_scores(&student);
        assert_eq!(ranks, vec![1, 2]);
        let loss = distill_loss(&student, &teacher, &ranks).unwrap();
        assert_relative_eq!(loss, 0.5 * (1.0 + (-1.0f64).exp()).ln(), epsilon = 1e-12);
        assert_relative_eq!(loss, 0.156631, epsilon = 1e-6);
    }

    #[test]
    fn worked_two_candidate_disagreeing_student() {
        let student = [1.0, 2.0];
        let teacher = [10.0, 5.0];
        let ranks = ranks_from_scores(&student);
        assert_eq!(ranks, vec![2, 1]);
        let loss = distill_loss(&student, &teacher, &ranks).unwrap();
        assert_relative_eq!(loss, 0.5 * (1.0 + 1.0f64.exp()).ln(), epsilon = 1e-12);
        assert_relative_eq!(loss, 0.656631, epsilon = 1e-6);
        // Disagreement costs more than agreement.
        assert!(loss > 0.156632);
    }

    #[test]
    fn in_batch_sentinels_only_lose() {
        let teacher = [5.0, f64::NEG_INFINITY, f64::NEG_INFINITY];
        let pairs = lambda_pairs(&teacher, &[1, 2, 3]);
        assert_eq!(pairs.len(), 2);
        for p in &pairs {
            assert_eq!(p.winner, 0);
        }
    }

    #[test]
    fn errors_on_malformed_inputs() {
        assert!(matches!(
            distill_loss(&[1.0], &[1.0, 2.0], &[1, 2]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            distill_loss(&[1.0, 2.0], &[1.0, 2.0], &[1, 1]),
            Err(Error::NotAPermutation(2))
        ));
        assert!(matches!(
            distill_loss(&[1.0, 2.0], &[1.0, 2.0], &[0, 1]),
            Err(Error::NotAPermutation(2))
        ));
        assert!(matches!(
            distill_loss(&[1.0], &[1.0], &[1]),
            Err(Error::TooFewItems { .. })
        ));
    }

    #[test]
    fn score_grads_match_finite_differences() {
        let student = [0.3, -0.8, 1.2, 0.1];
        let teacher = [3.0, 1.0, 2.0, f64::NEG_INFINITY];
        let ranks = ranks_from_scores(&student);
        let pairs = lambda_pairs(&teacher, &ranks);
        let (_, grads) = loss_and_score_grads(&student, &pairs);
        let h = 1e-6;
        for i in 0..student.len() {
            let mut up = student.to_vec();
            let mut dn = student.to_vec();
            up[i] += h;
            dn[i] -= h;
            let fd = (loss_from_scores(&up, &pairs) - loss_from_scores(&dn, &pairs)) / (2.0 * h);
            assert_relative_eq!(grads[i], fd, epsilon = 1e-8);
        }
    }

    proptest! {
        #[test]
        fn loss_is_nonnegative_and_zero_only_without_pairs(
            student in proptest::collection::vec(-5.0..5.0f64, 2..8),
            teacher_grades in proptest::collection::vec(0..4i32, 2..8),
        ) {
            let n = student.len().min(teacher_grades.len());
            let student = &student[..n];
            let teacher: Vec<f64> = teacher_grades[..n].iter().map(|&g| g as f64).collect();
            let ranks = ranks_from_scores(student);
            let loss = distill_loss(student, &teacher, &ranks).unwrap();
            prop_assert!(loss >= 0.0);
            let has_ordered_pair = teacher
                .iter()
                .any(|a| teacher.iter().any(|b| a > b));
            if has_ordered_pair {
                // Some pair may still carry weight zero (equal reciprocal
                // ranks are impossible for distinct candidates), so any
                // ordered pair forces a strictly positive loss.
                prop_assert!(loss > 0.0);
            } else {
                prop_assert_eq!(loss, 0.0);
            }
        }
    }
}
