//! Kernel learning algorithms: PCA with cumulative percent variance, Lloyd
//! kernel k-means with inertia traces, soft-margin SVM trained by SMO, and a
//! stratified cross-validation harness with inner grid search.

mod cv;
mod kmeans;
mod kpca;
mod svm;
mod vmeasure;

pub use cv::{auto_gamma_grid, cross_validate, stratified_folds, CvResult, CvRun, FamilySpec};
pub use kmeans::{kernel_kmeans, ClusterAssignment};
pub use kpca::{kpca_fit, kpca_project, KpcaModel};
pub use svm::{svm_decision_axis, svm_predict, svm_train, svm_train_gram, BinarySvm, SvmModel};
pub use vmeasure::v_measure;
