"""Stateful layer wrappers around the kernels, plus a sequential container."""

from __future__ import annotations

import numpy as np

from . import kernels as K


class Layer:
    params: dict[str, np.ndarray]
    grads: dict[str, np.ndarray]

    def __init__(self):
        self.params, self.grads = {}, {}
        self._cache = None

    def forward(self, x):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError


class Conv2d(Layer):
    def __init__(self, c_in, c_out, kernel=3, stride=1, pad=1, rng=None, dtype=np.float32):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        fan_in = c_in * kernel * kernel
        bound = np.sqrt(6.0 / fan_in)  # He-uniform
        self.params["weight"] = rng.uniform(-bound, bound, (c_out, c_in, kernel, kernel)).astype(dtype)
        self.params["bias"] = np.zeros(c_out, dtype=dtype)
        self.stride, self.pad = stride, pad

    def forward(self, x):
        out, self._cache = K.conv2d_forward(x, self.params["weight"], self.params["bias"],
                                            self.stride, self.pad)
        return out

    def backward(self, dout):
        dx, dw, db = K.conv2d_backward(dout, self._cache)
        self.grads["weight"], self.grads["bias"] = dw, db
        return dx


class UpConv2d(Conv2d):
    """Nearest x2 upsample fused with a 3x3 stride-1 pad-1 convolution."""

    def __init__(self, c_in, c_out, rng=None, dtype=np.float32):
        super().__init__(c_in, c_out, kernel=3, stride=1, pad=1, rng=rng, dtype=dtype)

    def forward(self, x):
        out, self._cache = K.upsample_conv2d_forward(x, self.params["weight"], self.params["bias"])
        return out

    def backward(self, dout):
        dx, dw, db = K.upsample_conv2d_backward(dout, self._cache)
        self.grads["weight"], self.grads["bias"] = dw, db
        return dx


class Dense(Layer):
    def __init__(self, n_in, n_out, rng=None, dtype=np.float32):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        bound = np.sqrt(6.0 / n_in)
        self.params["weight"] = rng.uniform(-bound, bound, (n_in, n_out)).astype(dtype)
        self.params["bias"] = np.zeros(n_out, dtype=dtype)

    def forward(self, x):
        out, self._cache = K.dense_forward(x, self.params["weight"], self.params["bias"])
        return out

    def backward(self, dout):
        dx, dw, db = K.dense_backward(dout, self._cache)
        self.grads["weight"], self.grads["bias"] = dw, db
        return dx


class ReLU(Layer):
    def forward(self, x):
        out, self._cache = K.relu_forward(x)
        return out

    def backward(self, dout):
        return K.relu_backward(dout, self._cache)


class Sigmoid(Layer):
    def forward(self, x):
        out, self._cache = K.sigmoid_forward(x)
        return out

    def backward(self, dout):
        return K.sigmoid_backward(dout, self._cache)


class MaxPool2d(Layer):
    def __init__(self, size=2):
        super().__init__()
        self.size = size

    def forward(self, x):
        out, self._cache = K.maxpool2d_forward(x, self.size)
        return out

    def backward(self, dout):
        return K.maxpool2d_backward(dout, self._cache)


class Upsample(Layer):
    def __init__(self, factor=2):
        super().__init__()
        self.factor = factor

    def forward(self, x):
        out, _ = K.upsample_nearest_forward(x, self.factor)
        return out

    def backward(self, dout):
        return K.upsample_nearest_backward(dout, self.factor)


class Flatten(Layer):
    def forward(self, x):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._cache)


class Sequential(Layer):
    def __init__(self, *layers):
        super().__init__()
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def named_params(self, prefix: str = ""):
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params.items():
                yield f"{prefix}{i}.{name}", layer, name, arr

    def state_dict(self, prefix: str = "") -> dict[str, np.ndarray]:
        return {key: arr for key, _, _, arr in self.named_params(prefix)}

    def load_state_dict(self, state: dict[str, np.ndarray], prefix: str = ""):
        for key, layer, name, arr in self.named_params(prefix):
            if key not in state:
                raise KeyError(f"checkpoint lacks {key}")
            if state[key].shape != arr.shape:
                raise ValueError(f"{key}: checkpoint shape {state[key].shape} != {arr.shape}")
            layer.params[name] = np.asarray(state[key], dtype=arr.dtype).copy()
