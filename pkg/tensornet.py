# -*- coding: utf-8 -*-
"""
Одномерная сверточная сеть без фреймворков: свертки с same-дополнением, max pooling,
ReLU, полносвязный слой, softmax, MSE, Adam и цикл обучения с сохранением лучшего
чекпоинта
"""

import time
import struct
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from beats import stack_windows
from datasets import DatasetSplit, LabeledSegment, carve_validation

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"RRR1"
CHECKPOINT_VERSION = 1
OPTIMIZER_TAG = b"ADAM"
EVAL_BATCH_SIZE = 256


class ShapeError(ValueError):
    """Несовпадение формы входа или параметров"""


class StaleCacheError(RuntimeError):
    """Обратный проход без соответствующего прямого"""


class TrainingDivergedError(RuntimeError):
    """Функция потерь стала не конечной"""

    def __init__(self, message: str, log: List["TrainLogEntry"]):
        super().__init__(message)
        self.log = log


class CheckpointError(Exception):
    """Ошибка чтения чекпоинта"""


class CheckpointVersionError(CheckpointError):
    """Неверная сигнатура или версия формата"""


class CheckpointTruncatedError(CheckpointError):
    """Файл чекпоинта обрезан"""


class CheckpointShapeError(CheckpointError):
    """Архитектура чекпоинта не совпадает с моделью"""


# ---------------------------------------------------------------------------
# Слои
# ---------------------------------------------------------------------------

class Layer:
    """Базовый слой: прямой проход кэширует то, что нужно обратному"""
    name = "layer"

    def __init__(self):
        self._cache = None

    def forward(self, x: np.ndarray, cache: bool = True) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def parameters(self) -> List[Tuple[str, np.ndarray]]:
        return []

    def gradients(self) -> List[np.ndarray]:
        return []

    def _take_cache(self):
        if self._cache is None:
            raise StaleCacheError(f"Слой {self.name}: нет данных прямого прохода")
        cached, self._cache = self._cache, None
        return cached


class Conv1DLayer(Layer):
    """Свертка (взаимная корреляция) с same-дополнением нулями"""

    def __init__(self, kernel_size: int, in_channels: int, out_channels: int,
                 name: str = "conv", dtype=np.float32):
        super().__init__()
        self.name = name
        self.kernel_size = kernel_size
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.weights = np.zeros((out_channels, in_channels, kernel_size), dtype=dtype)
        self.biases = np.zeros(out_channels, dtype=dtype)
        self.grad_weights = np.zeros_like(self.weights)
        self.grad_biases = np.zeros_like(self.biases)

    @property
    def padding(self) -> Tuple[int, int]:
        left = (self.kernel_size - 1) // 2
        return left, self.kernel_size - 1 - left

    def forward(self, x: np.ndarray, cache: bool = True) -> np.ndarray:
        out, cols = _conv1d_same(x, self)
        self._cache = (cols, x.shape) if cache else None
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        cols, (n, channels, length) = self._take_cache()
        k = self.kernel_size
        grad_rows = grad.transpose(0, 2, 1).reshape(n * length, self.out_channels)

        self.grad_weights = (grad_rows.T @ cols).reshape(self.weights.shape).astype(self.weights.dtype)
        self.grad_biases = grad_rows.sum(axis=0, dtype=np.float64).astype(self.biases.dtype)

        grad_cols = (grad_rows @ self.weights.reshape(self.out_channels, -1)).reshape(n, length, channels, k)
        left, _ = self.padding
        grad_padded = np.zeros((n, channels, length + k - 1), dtype=grad.dtype)
        for j in range(k):
            grad_padded[:, :, j:j + length] += grad_cols[:, :, :, j].transpose(0, 2, 1)
        return grad_padded[:, :, left:left + length]

    def parameters(self) -> List[Tuple[str, np.ndarray]]:
        return [(f"{self.name}.weights", self.weights), (f"{self.name}.biases", self.biases)]

    def gradients(self) -> List[np.ndarray]:
        return [self.grad_weights, self.grad_biases]


class MaxPool1D(Layer):
    """Max pooling без перекрытия, хвост короче окна отбрасывается"""

    def __init__(self, pool_size: int = 5, name: str = "pool"):
        super().__init__()
        self.name = name
        self.pool_size = pool_size

    def forward(self, x: np.ndarray, cache: bool = True) -> np.ndarray:
        out, argmax = maxpool_forward(x, self.pool_size)
        self._cache = (argmax, x.shape) if cache else None
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        argmax, (n, channels, length) = self._take_cache()
        pooled = argmax.shape[2]
        grad_windows = np.zeros((n, channels, pooled, self.pool_size), dtype=grad.dtype)
        np.put_along_axis(grad_windows, argmax[..., None], grad[..., None], axis=3)
        grad_input = np.zeros((n, channels, length), dtype=grad.dtype)
        grad_input[:, :, :pooled * self.pool_size] = grad_windows.reshape(n, channels, -1)
        return grad_input


class ReLU(Layer):
    name = "relu"

    def forward(self, x: np.ndarray, cache: bool = True) -> np.ndarray:
        if cache:
            self._cache = x > 0
        return np.maximum(x, 0)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        # в нуле производная 0
        return grad * self._take_cache()


class Flatten(Layer):
    name = "flatten"

    def forward(self, x: np.ndarray, cache: bool = True) -> np.ndarray:
        if cache:
            self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad.reshape(self._take_cache())


class DenseLayer(Layer):
    """Полносвязный слой: признаки -> логиты классов"""

    def __init__(self, in_features: int, n_classes: int, name: str = "dense", dtype=np.float32):
        super().__init__()
        self.name = name
        self.in_features = in_features
        self.n_classes = n_classes
        self.weights = np.zeros((n_classes, in_features), dtype=dtype)
        self.biases = np.zeros(n_classes, dtype=dtype)
        self.grad_weights = np.zeros_like(self.weights)
        self.grad_biases = np.zeros_like(self.biases)

    def forward(self, x: np.ndarray, cache: bool = True) -> np.ndarray:
        if x.shape[1] != self.in_features:
            raise ShapeError(f"Слой {self.name}: ожидается {self.in_features} признаков, получено {x.shape[1]}")
        if cache:
            self._cache = x
        return x @ self.weights.T + self.biases

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x = self._take_cache()
        self.grad_weights = (grad.T @ x).astype(self.weights.dtype)
        self.grad_biases = grad.sum(axis=0, dtype=np.float64).astype(self.biases.dtype)
        return grad @ self.weights

    def parameters(self) -> List[Tuple[str, np.ndarray]]:
        return [(f"{self.name}.weights", self.weights), (f"{self.name}.biases", self.biases)]

    def gradients(self) -> List[np.ndarray]:
        return [self.grad_weights, self.grad_biases]


class Softmax(Layer):
    """Softmax с вычитанием максимума; вероятности в float64"""
    name = "softmax"

    def forward(self, x: np.ndarray, cache: bool = True) -> np.ndarray:
        probabilities = softmax(x)
        if cache:
            self._cache = (probabilities, x.dtype)
        return probabilities

    def backward(self, grad: np.ndarray) -> np.ndarray:
        probabilities, dtype = self._take_cache()
        # якобиан softmax: p * (g - <g, p>)
        inner = np.sum(grad * probabilities, axis=1, keepdims=True)
        return (probabilities * (grad - inner)).astype(dtype)


# ---------------------------------------------------------------------------
# Функции слоев
# ---------------------------------------------------------------------------

def _conv1d_same(x: np.ndarray, layer: Conv1DLayer) -> Tuple[np.ndarray, np.ndarray]:
    """Свертка через im2col; возвращает выход и развернутые столбцы"""
    if x.ndim != 3 or x.shape[1] != layer.in_channels:
        raise ShapeError(
            f"Слой {layer.name}: ожидается {layer.in_channels} входных каналов, форма входа {x.shape}"
        )
    n, channels, length = x.shape
    left, right = layer.padding
    padded = np.pad(x, ((0, 0), (0, 0), (left, right)))
    cols = sliding_window_view(padded, layer.kernel_size, axis=2)
    cols = cols.transpose(0, 2, 1, 3).reshape(n * length, channels * layer.kernel_size)
    out = cols @ layer.weights.reshape(layer.out_channels, -1).T + layer.biases
    return out.reshape(n, length, layer.out_channels).transpose(0, 2, 1), cols


def conv1d_same_forward(x: np.ndarray, layer: Conv1DLayer) -> np.ndarray:
    """
    Прямой проход свертки: дополнение слева floor((k-1)/2), справа ceil((k-1)/2)

    Args:
        x: Вход формы (N, каналы, длина) или (каналы, длина)
        layer: Сверточный слой

    Returns:
        np.ndarray: выход той же длины с out_channels каналами
    """
    single = x.ndim == 2
    out, _ = _conv1d_same(x[None] if single else x, layer)
    return out[0] if single else out


def maxpool_forward(x: np.ndarray, pool_size: int = 5) -> Tuple[np.ndarray, np.ndarray]:
    """Max pooling с шагом pool_size; argmax - индекс первого максимума в окне"""
    n, channels, length = x.shape
    pooled = length // pool_size
    windows = x[:, :, :pooled * pool_size].reshape(n, channels, pooled, pool_size)
    argmax = windows.argmax(axis=3)
    out = np.take_along_axis(windows, argmax[..., None], axis=3)[..., 0]
    return out, argmax


def maxpool5_forward(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Max pooling с коэффициентом 5"""
    single = x.ndim == 2
    out, argmax = maxpool_forward(x[None] if single else x, 5)
    return (out[0], argmax[0]) if single else (out, argmax)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits.astype(np.float64) - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def one_hot(labels: Sequence[int], n_classes: int) -> np.ndarray:
    targets = np.zeros((len(labels), n_classes), dtype=np.float64)
    targets[np.arange(len(labels)), np.asarray(labels, dtype=np.int64)] = 1.0
    return targets


def mse_loss(probabilities: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Среднеквадратичная ошибка по батчу и классам

    Returns:
        Tuple[float, np.ndarray]: значение потерь и градиент по вероятностям
        2 (p - t) / (N * K); через якобиан softmax его проводит Model.backward
    """
    if probabilities.shape != targets.shape:
        raise ShapeError(f"Формы вероятностей {probabilities.shape} и целей {targets.shape} не совпадают")
    diff = probabilities.astype(np.float64) - targets
    loss = float(np.mean(diff * diff))
    return loss, 2.0 * diff / diff.size


# ---------------------------------------------------------------------------
# Модель
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """Описание архитектуры"""
    input_length: int = 2700
    n_classes: int = 5
    kernel_sizes: Tuple[int, ...] = (5, 10, 15)
    channels: Tuple[int, ...] = (32, 64, 128)
    pool_size: int = 5

    @property
    def flatten_width(self) -> int:
        length = self.input_length
        for _ in self.kernel_sizes:
            length //= self.pool_size
        return length * self.channels[-1]


class Model:
    """Последовательность [Conv, Pool, ReLU] x 3, Flatten, Dense, Softmax"""

    def __init__(self, spec: ModelSpec, dtype=np.float32):
        if len(spec.kernel_sizes) != len(spec.channels) or not spec.kernel_sizes:
            raise ShapeError("Число ядер и число каналов сверточных слоев должны совпадать")
        if spec.flatten_width <= 0:
            raise ShapeError(f"Вход длины {spec.input_length} слишком короток для {len(spec.kernel_sizes)} пулингов")
        self.spec = spec
        self.dtype = np.dtype(dtype)
        self.layers: List[Layer] = []
        in_channels = 1
        for index, (kernel, out_channels) in enumerate(zip(spec.kernel_sizes, spec.channels), start=1):
            self.layers.append(Conv1DLayer(kernel, in_channels, out_channels, name=f"conv{index}", dtype=dtype))
            self.layers.append(MaxPool1D(spec.pool_size, name=f"pool{index}"))
            self.layers.append(ReLU())
            in_channels = out_channels
        self.layers.append(Flatten())
        self.layers.append(DenseLayer(spec.flatten_width, spec.n_classes, dtype=dtype))
        self.layers.append(Softmax())

    @property
    def n_classes(self) -> int:
        return self.spec.n_classes

    def parameters(self) -> List[Tuple[str, np.ndarray]]:
        return [item for layer in self.layers for item in layer.parameters()]

    def parameter_arrays(self) -> List[np.ndarray]:
        return [array for _, array in self.parameters()]

    def gradients(self) -> List[np.ndarray]:
        return [grad for layer in self.layers for grad in layer.gradients()]

    def get_state(self) -> List[np.ndarray]:
        return [array.copy() for array in self.parameter_arrays()]

    def set_state(self, state: Sequence[np.ndarray]) -> None:
        arrays = self.parameter_arrays()
        if len(arrays) != len(state):
            raise ShapeError(f"Ожидается {len(arrays)} тензоров параметров, получено {len(state)}")
        for target, source in zip(arrays, state):
            if target.shape != source.shape:
                raise ShapeError(f"Форма параметра {source.shape} не совпадает с {target.shape}")
            target[...] = source

    def forward(self, x: np.ndarray, cache: bool = True) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 3 or x.shape[1] != 1 or x.shape[2] != self.spec.input_length:
            raise ShapeError(f"Ожидается вход (N, 1, {self.spec.input_length}), получено {x.shape}")
        for layer in self.layers:
            x = layer.forward(x, cache=cache)
        return x

    def backward(self, output_gradient: np.ndarray) -> List[np.ndarray]:
        grad = np.asarray(output_gradient, dtype=np.float64)
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return self.gradients()


def build_model(
    n_classes: int,
    input_length: int = 2700,
    kernel_sizes: Sequence[int] = (5, 10, 15),
    channels: Sequence[int] = (32, 64, 128),
    pool_size: int = 5,
    seed: Optional[int] = 0,
    init: str = "uniform",
    dtype=np.float32,
) -> Model:
    """
    Создает модель; веса равномерно в ±sqrt(6 / fan_in), смещения нулевые

    Args:
        n_classes: Число классов
        input_length: Длина окна
        kernel_sizes: Размеры ядер сверток
        channels: Число карт признаков сверток
        pool_size: Коэффициент пулинга
        seed: Зерно инициализации
        init: "uniform" или "zeros"
        dtype: Тип параметров

    Returns:
        Model: инициализированная модель
    """
    spec = ModelSpec(input_length, n_classes, tuple(kernel_sizes), tuple(channels), pool_size)
    model = Model(spec, dtype=dtype)
    if init == "zeros":
        return model
    if init != "uniform":
        raise ValueError(f"Неизвестная инициализация: {init}")

    rng = np.random.default_rng(seed)
    for name, array in model.parameters():
        if name.endswith(".weights"):
            fan_in = int(np.prod(array.shape[1:]))
            limit = np.sqrt(6.0 / fan_in)
            array[...] = rng.uniform(-limit, limit, size=array.shape)
    return model


def forward(model: Model, batch: np.ndarray) -> np.ndarray:
    """Вероятности классов для батча (N, 1, input_length)"""
    return model.forward(batch)


def backward(model: Model, output_gradient: np.ndarray) -> List[np.ndarray]:
    """Градиенты всех параметров по градиенту выхода (после последнего forward)"""
    return model.backward(output_gradient)


# ---------------------------------------------------------------------------
# Оптимизатор
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """Состояние Adam"""
    learning_rate: float = 0.0001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moments: List[np.ndarray] = field(default_factory=list)
    second_moments: List[np.ndarray] = field(default_factory=list)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState):
    """
    Шаг Adam с коррекцией смещения моментов; параметры обновляются на месте

    Returns:
        Tuple: (params, state)
    """
    if len(params) != len(grads):
        raise ShapeError("Число параметров и градиентов не совпадает")
    if not state.first_moments:
        state.first_moments = [np.zeros_like(p) for p in params]
        state.second_moments = [np.zeros_like(p) for p in params]
    for p, g, m in zip(params, grads, state.first_moments):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"Формы параметра {p.shape}, градиента {g.shape} и момента {m.shape} не совпадают")

    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.first_moments, state.second_moments):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)
    return params, state


# ---------------------------------------------------------------------------
# Обучение и оценка
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    """Параметры обучения (по умолчанию lr 0.0001, 83 эпохи)"""
    epochs: int = 83
    batch_size: int = 64
    eval_interval: int = 0  # 0 = раз в эпоху
    learning_rate: float = 0.0001
    lr_decay_factor: float = 0.5
    lr_patience: int = 5
    lr_floor: float = 1e-6
    seed: int = 0
    select_on_validation: bool = False
    validation_fraction: float = 0.1

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs не может быть отрицательным")
        if self.batch_size < 1:
            raise ValueError("batch_size должен быть >= 1")


@dataclass
class TrainLogEntry:
    """Одна точка кривой обучения"""
    step: int
    epoch: int
    loss: float
    train_accuracy: float
    eval_loss: float
    eval_accuracy: float
    learning_rate: float


@dataclass
class TrainResult:
    """Лучший чекпоинт и журнал обучения"""
    best_state: List[np.ndarray]
    best_accuracy: Optional[float]
    best_step: int
    log: List[TrainLogEntry]
    optimizer: AdamState


@dataclass
class Evaluation:
    """Предсказания модели"""
    predictions: np.ndarray
    probabilities: np.ndarray


def predict_windows(model: Model, windows: np.ndarray, batch_size: int = EVAL_BATCH_SIZE) -> Evaluation:
    """Прямой проход по батчам без кэша; argmax с выбором первого индекса при равенстве"""
    chunks = [
        model.forward(windows[start:start + batch_size], cache=False)
        for start in range(0, windows.shape[0], batch_size)
    ]
    probabilities = np.concatenate(chunks) if chunks else np.zeros((0, model.n_classes))
    return Evaluation(predictions=probabilities.argmax(axis=1), probabilities=probabilities)


def evaluate(model: Model, segments: Sequence, batch_size: int = EVAL_BATCH_SIZE) -> Evaluation:
    """
    Предсказания для сегментов (BeatSegment или LabeledSegment)

    Returns:
        Evaluation: индексы классов и векторы вероятностей
    """
    beats = [item.segment if isinstance(item, LabeledSegment) else item for item in segments]
    probabilities = []
    for start in range(0, len(beats), batch_size):
        windows = stack_windows(beats[start:start + batch_size])
        probabilities.append(model.forward(windows, cache=False))
    if not probabilities:
        return Evaluation(np.zeros(0, dtype=np.int64), np.zeros((0, model.n_classes)))
    probabilities = np.concatenate(probabilities)
    return Evaluation(predictions=probabilities.argmax(axis=1), probabilities=probabilities)


def _labels(items: Sequence[LabeledSegment]) -> np.ndarray:
    return np.array([item.class_index for item in items], dtype=np.int64)


def train(model: Model, split: DatasetSplit, config: TrainConfig) -> TrainResult:
    """
    Обучает модель мини-батчами, периодически оценивает точность и сохраняет
    лучший по ней набор весов; скорость обучения уменьшается на плато

    Args:
        model: Модель (обновляется на месте, в конце содержит лучшие веса)
        split: Разбиение train/test
        config: Параметры обучения

    Returns:
        TrainResult: лучшие веса, журнал (step, loss, eval accuracy, lr, ...)
    """
    if not split.train:
        raise ValueError("Пустая обучающая выборка")

    if config.select_on_validation:
        if not split.validation:
            split = carve_validation(split, config.validation_fraction, config.seed)
        eval_items = split.validation
    else:
        eval_items = split.test
    if not eval_items:
        raise ValueError("Пустая выборка для оценки")

    state = AdamState(learning_rate=config.learning_rate)
    log: List[TrainLogEntry] = []
    best_state = model.get_state()
    if config.epochs == 0:
        return TrainResult(best_state=best_state, best_accuracy=None, best_step=0, log=log, optimizer=state)

    rng = np.random.default_rng(config.seed)
    eval_windows = stack_windows([item.segment for item in eval_items])
    eval_labels = _labels(eval_items)
    eval_targets = one_hot(eval_labels, model.n_classes)

    n_train = len(split.train)
    batches_per_epoch = -(-n_train // config.batch_size)
    interval = config.eval_interval or batches_per_epoch

    best_accuracy = -1.0
    best_step = 0
    stale_evaluations = 0
    step = 0
    running_loss, running_correct, running_seen, running_batches = 0.0, 0, 0, 0
    started = time.perf_counter()

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_train)
        for start in range(0, n_train, config.batch_size):
            batch = [split.train[i] for i in order[start:start + config.batch_size]]
            windows = stack_windows([item.segment for item in batch])
            labels = _labels(batch)

            probabilities = model.forward(windows)
            loss, grad = mse_loss(probabilities, one_hot(labels, model.n_classes))
            if not np.isfinite(loss):
                logger.error(f"Расхождение обучения на шаге {step + 1}: loss={loss}")
                raise TrainingDivergedError(f"Не конечное значение потерь на шаге {step + 1}", log)
            model.backward(grad)
            adam_step(model.parameter_arrays(), model.gradients(), state)
            step += 1

            running_loss += loss
            running_batches += 1
            running_correct += int(np.count_nonzero(probabilities.argmax(axis=1) == labels))
            running_seen += len(batch)

            if step % interval:
                continue

            evaluation = predict_windows(model, eval_windows)
            eval_loss, _ = mse_loss(evaluation.probabilities, eval_targets)
            eval_accuracy = float(np.mean(evaluation.predictions == eval_labels))
            entry = TrainLogEntry(
                step=step,
                epoch=epoch,
                loss=running_loss / running_batches,
                train_accuracy=running_correct / running_seen,
                eval_loss=eval_loss,
                eval_accuracy=eval_accuracy,
                learning_rate=state.learning_rate,
            )
            log.append(entry)
            running_loss, running_correct, running_seen, running_batches = 0.0, 0, 0, 0
            logger.info(
                f"Эпоха {epoch}, шаг {step}: loss={entry.loss:.6f}, train_acc={entry.train_accuracy:.4f}, "
                f"eval_acc={eval_accuracy:.4f}, lr={state.learning_rate:.2e}"
            )

            if eval_accuracy > best_accuracy:
                best_accuracy = eval_accuracy
                best_step = step
                best_state = model.get_state()
                stale_evaluations = 0
            else:
                stale_evaluations += 1
                if stale_evaluations >= config.lr_patience:
                    new_rate = max(state.learning_rate * config.lr_decay_factor, config.lr_floor)
                    if new_rate < state.learning_rate:
                        logger.info(f"Плато: скорость обучения {state.learning_rate:.2e} -> {new_rate:.2e}")
                        state.learning_rate = new_rate
                    stale_evaluations = 0

    if not log:
        # интервал оценки длиннее всего обучения
        evaluation = predict_windows(model, eval_windows)
        best_accuracy = float(np.mean(evaluation.predictions == eval_labels))
        best_state, best_step = model.get_state(), step

    model.set_state(best_state)
    logger.info(
        f"Обучение завершено за {time.perf_counter() - started:.1f} с: "
        f"лучшая точность {best_accuracy:.4f} на шаге {best_step}"
    )
    return TrainResult(best_state=best_state, best_accuracy=best_accuracy, best_step=best_step, log=log, optimizer=state)


# ---------------------------------------------------------------------------
# Проверка градиентов
# ---------------------------------------------------------------------------

@dataclass
class GradientCheckResult:
    max_relative_error: float
    worst_parameter: str


def gradient_check(model: Model, x: np.ndarray, targets: np.ndarray, h: float = 1e-3,
                   floor: float = 1e-6) -> GradientCheckResult:
    """
    Сравнивает аналитические градиенты с центральными разностями по каждому параметру.
    Относительная ошибка |a - n| / max(|a|, |n|, floor)
    """
    probabilities = model.forward(x)
    _, grad = mse_loss(probabilities, targets)
    analytic = [g.copy() for g in model.backward(grad)]

    worst, worst_name = 0.0, ""
    for (name, array), analytic_grad in zip(model.parameters(), analytic):
        flat = array.reshape(-1)
        analytic_flat = analytic_grad.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            loss_plus, _ = mse_loss(model.forward(x, cache=False), targets)
            flat[i] = original - h
            loss_minus, _ = mse_loss(model.forward(x, cache=False), targets)
            flat[i] = original
            numeric = (loss_plus - loss_minus) / (2 * h)
            error = abs(analytic_flat[i] - numeric) / max(abs(analytic_flat[i]), abs(numeric), floor)
            if error > worst:
                worst, worst_name = float(error), f"{name}[{i}]"
    return GradientCheckResult(max_relative_error=worst, worst_parameter=worst_name)


# ---------------------------------------------------------------------------
# Чекпоинты
# ---------------------------------------------------------------------------

def _architecture_descriptor(model: Model) -> bytes:
    spec = model.spec
    parts = [struct.pack("<IIII", spec.input_length, spec.n_classes, spec.pool_size, len(spec.kernel_sizes))]
    parts += [struct.pack("<II", kernel, channels) for kernel, channels in zip(spec.kernel_sizes, spec.channels)]
    arrays = model.parameter_arrays()
    parts.append(struct.pack("<I", len(arrays)))
    for array in arrays:
        parts.append(struct.pack(f"<B{array.ndim}I", array.ndim, *array.shape))
    return b"".join(parts)


def _tensor_bytes(arrays: Sequence[np.ndarray]) -> bytes:
    return b"".join(np.ascontiguousarray(array, dtype="<f4").tobytes() for array in arrays)


def save_weights(model: Model, path: str, state: Optional[AdamState] = None) -> None:
    """
    Сохраняет чекпоинт: "RRR1", версия, описание архитектуры, параметры float32 LE
    в порядке объявления; состояние Adam - отдельной секцией "ADAM"
    """
    arrays = model.parameter_arrays()
    for name, array in model.parameters():
        if not np.all(np.isfinite(array)):
            raise ValueError(f"Параметр {name} содержит не конечные значения")

    with_optimizer = state is not None and bool(state.first_moments)
    parts = [
        struct.pack("<4sHH", CHECKPOINT_MAGIC, CHECKPOINT_VERSION, 1 if with_optimizer else 0),
        _architecture_descriptor(model),
        _tensor_bytes(arrays),
    ]
    if with_optimizer:
        parts.append(OPTIMIZER_TAG)
        parts.append(struct.pack("<Qdddd", state.step, state.learning_rate, state.beta1, state.beta2, state.epsilon))
        parts.append(_tensor_bytes(state.first_moments))
        parts.append(_tensor_bytes(state.second_moments))

    with open(path, "wb") as f:
        f.write(b"".join(parts))
    logger.info(f"Чекпоинт сохранен: {path}")


class _Reader:
    """Последовательное чтение буфера чекпоинта"""

    def __init__(self, data: bytes):
        self.data = data
        self.position = 0

    def take(self, size: int) -> bytes:
        if self.position + size > len(self.data):
            raise CheckpointTruncatedError(f"Чекпоинт обрезан на смещении {self.position}")
        chunk = self.data[self.position:self.position + size]
        self.position += size
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def tensors(self, shapes: Sequence[Tuple[int, ...]]) -> List[np.ndarray]:
        arrays = []
        for shape in shapes:
            count = int(np.prod(shape))
            arrays.append(np.frombuffer(self.take(4 * count), dtype="<f4").reshape(shape).copy())
        return arrays


def load_weights(model: Model, path: str) -> Optional[AdamState]:
    """
    Загружает чекпоинт в модель с проверкой архитектуры

    Returns:
        Optional[AdamState]: состояние оптимизатора, если оно было сохранено
    """
    with open(path, "rb") as f:
        reader = _Reader(f.read())

    magic, version, flags = reader.unpack("<4sHH")
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointVersionError(f"Неверная сигнатура чекпоинта: {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"Неподдерживаемая версия чекпоинта: {version}")

    input_length, n_classes, pool_size, n_conv = reader.unpack("<IIII")
    convs = [reader.unpack("<II") for _ in range(n_conv)]
    (n_tensors,) = reader.unpack("<I")
    shapes = []
    for _ in range(n_tensors):
        (ndim,) = reader.unpack("<B")
        shapes.append(reader.unpack(f"<{ndim}I"))

    stored = ModelSpec(
        input_length, n_classes,
        tuple(kernel for kernel, _ in convs), tuple(channels for _, channels in convs), pool_size,
    )
    expected_shapes = [array.shape for array in model.parameter_arrays()]
    if stored != model.spec or [tuple(s) for s in shapes] != expected_shapes:
        raise CheckpointShapeError(f"Архитектура чекпоинта {stored} не совпадает с моделью {model.spec}")

    weights = reader.tensors(shapes)

    state = None
    if flags & 1:
        if reader.take(len(OPTIMIZER_TAG)) != OPTIMIZER_TAG:
            raise CheckpointError("Ожидается секция состояния оптимизатора")
        step, learning_rate, beta1, beta2, epsilon = reader.unpack("<Qdddd")
        state = AdamState(
            learning_rate=learning_rate, beta1=beta1, beta2=beta2, epsilon=epsilon, step=step,
            first_moments=[m.astype(model.dtype) for m in reader.tensors(shapes)],
            second_moments=[v.astype(model.dtype) for v in reader.tensors(shapes)],
        )
    model.set_state(weights)
    logger.info(f"Чекпоинт загружен: {path}")
    return state
