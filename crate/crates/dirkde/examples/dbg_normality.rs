use dirkde::models::{DirLinMixture, NormalComponent, VmfComponent};
use dirkde::risk::normality_check;
use dirkde::sphere::UnitVector;

fn main() {
    let m = DirLinMixture::new(
        vec![1.0],
        vec![VmfComponent::new(UnitVector::new(vec![1.0, 0.0]).unwrap(), 2.0).unwrap()],
        vec![NormalComponent::new(0.0, 1.0).unwrap()],
    )
    .unwrap();
    let x = UnitVector::new(vec![1.0, 0.0]).unwrap();
    let rep = normality_check(&m, &x, 0.5, 0.4, 0.4, 2000, 500, 42).unwrap();
    println!("ks = {}, p = {}, mean = {}", rep.ks_statistic, rep.p_value, rep.standardized_mean);
    let rep2 = normality_check(&m, &x, 0.0, 0.4, 0.4, 2000, 500, 42).unwrap();
    println!("at z=0: ks = {}, p = {}, mean = {}", rep2.ks_statistic, rep2.p_value, rep2.standardized_mean);
}
