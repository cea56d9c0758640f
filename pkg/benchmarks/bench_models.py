from __future__ import absolute_import, division, print_function

import numpy as np

import workflowrecognition as wr
from workflowrecognition.datasets import load_synth_config, synth_generate


class ModelPasses(object):

    params = ['frame-mlp', 'clip-conv', 'gru', 'mstcn']
    param_names = ['kind']

    timeout = 10 * 60

    def setup(self, kind):

        cfg = load_synth_config('internal-7').replace(num_videos=1)
        self.seq, self.labels = synth_generate(cfg)[0]

        self.spec = wr.ModelSpec(kind, feature_dim=self.seq.D,
                                 num_filters=32, layers_per_stage=10)
        self.model = wr.get_model(self.spec)
        self.store = self.model.init_params(0)

    def time_forward(self, kind):

        self.model.forward(self.store, self.seq)

    def time_loss_and_grad(self, kind):

        self.model.loss_and_grad(self.store, self.seq, self.labels)
        self.store.zero_grads()


class Generator(object):

    def time_internal_7(self):

        synth_generate(load_synth_config('internal-7'))


class Metrics(object):

    def setup(self):

        rng = np.random.default_rng(0)
        self.scores = rng.standard_normal(5000)
        self.labels = rng.integers(0, 2, 5000)

    def time_average_precision(self):

        wr.average_precision(self.scores, self.labels)
