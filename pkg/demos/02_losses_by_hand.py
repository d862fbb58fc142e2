"""Why plain MSE hides minority mistakes, and what MFE, MSFE and GMSE do about it.

A batch of 100: 90 majority samples (5 misclassified) and 10 minority
samples (5 misclassified).  Each misclassification is a fully wrong one-hot
prediction.
"""
import numpy as np

from imblab.losses import GmseState, compute_H, compute_T, gmse_loss, mfe_loss, mse_loss, msfe_loss, one_hot, update_kappa

labels = np.array([0] * 90 + [1] * 10)
preds = np.array([0] * 85 + [1] * 5 + [1] * 5 + [0] * 5)
probs, targets = one_hot(preds, 2), one_hot(labels, 2)

print(f"MSE  = {mse_loss(probs, targets)[0]:.4f}   every sample counts the same")
print(f"MFE  = {mfe_loss(probs, targets, positive_class=1)[0]:.4f}   majority and minority errors averaged separately")
print(f"MSFE = {msfe_loss(probs, targets, positive_class=1)[0]:.4f}   squaring favours balanced group errors")

# GMSE scales minority errors by a learned weight kappa.  Its ceiling H grows
# with the imbalance ratio and with how separable the classes are.
H = compute_H(IR=9.0, S=0.5)
state = GmseState(kappa=1.0, H=H, minority_classes=(1,), lr_kappa=0.3)
print(f"\nH = {H:.2f}")
for epoch, gmean in enumerate([0.0, 0.4, 0.7, 0.9]):
    T = compute_T("T2", H, gmean, accuracy=0.9)
    value = gmse_loss(probs, targets, labels, state)[0]
    print(f"epoch {epoch}: kappa {state.kappa:.3f}, GMSE {value:.4f}, next target {T:.3f} (val G-Mean {gmean})")
    state = update_kappa(state, T)
