# # A small network and a bag of them
#
# The classifier is a ReLU network with a softmax output, trained with Adam on
# mean cross-entropy. Bagging trains several copies on stratified bootstrap
# samples and averages their probabilities.

import numpy as np

from isdecode import (TrainConfig, bagging_train, load_model, mlp_init, predict, predict_proba,
                      save_model, train_mlp)

rng = np.random.default_rng(0)

# ## XOR, the classic non-linear toy problem

X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
y = np.array([0, 1, 1, 0])
net = train_mlp(X, y, TrainConfig(hidden=8, epochs=2000, lr=0.01))
print("XOR predictions:", predict(net, X))

# ## Two noisy clouds
#
# With few training points single networks swing with their seed; the bag
# smooths that out.

def clouds(n):
    lab = np.arange(n) % 2
    return rng.standard_normal((n, 2)) + np.c_[lab, lab] - 0.5, lab


Xtr, ytr = clouds(40)
Xte, yte = clouds(1000)
cfg = dict(hidden=32, epochs=80, lr=0.01, batch_size=8)
single = [np.mean(predict(train_mlp(Xtr, ytr, TrainConfig(seed=s, **cfg)), Xte) == yte)
          for s in range(5)]
bag = bagging_train(Xtr, ytr, 15, TrainConfig(seed=99, **cfg))
print("single networks:", np.round(single, 3))
print("bag of 15:      ", round(float(np.mean(predict(bag, Xte) == yte)), 3))
print("first rows of averaged probabilities:\n", np.round(predict_proba(bag, Xte[:3]), 3))

# ## Saving
#
# Models go to a compact binary file with the layer sizes and every member's
# seed and parameters.

import tempfile
from pathlib import Path

path = Path(tempfile.mkdtemp()) / "bag.ism"
save_model(bag, path)
print("reloaded members:", len(load_model(path).members), "file bytes:", path.stat().st_size)
print("a 1830-input, 100-hidden, 2-class network has",
      mlp_init((1830, 100, 2)).flat().size, "parameters")
