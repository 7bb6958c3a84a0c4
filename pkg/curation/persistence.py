"""
Model Persistence
=================

Trained models are stored as one JSON document tagged with a schema version:

    {
      "schema": "curation.models/v1",
      "instance_model": {"kernel": {"kind": "rbf", "gamma": 0.0625},
                         "support": [{"features": [...], "alpha": 0.1, "y_tilde": 1.0}]},
      "bag_model": {"omega": [...], "k": 2, "xi_alpha": 1.0, "xi_beta": 0.0, "d_clamp": 1e-06}
    }

Floats are written with repr precision, so a reloaded model scores bit-for-bit
like the original. Either model may be null.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from mil.bag import BagModel, WeightParams
from mil.instance import InstanceModel
from mil.kernels import KernelSpec
from utils.exceptions import CurationError, ModelNotFound, SchemaError, SchemaVersionError

logger = logging.getLogger(__name__)

SCHEMA_TAG = 'curation.models/v1'

_NUMBER_LIST = {'type': 'array', 'items': {'type': 'number'}}

MODELS_SCHEMA = {
    'type': 'object',
    'required': ['schema', 'instance_model', 'bag_model'],
    'additionalProperties': False,
    'properties': {
        'schema': {'type': 'string'},
        'instance_model': {
            'oneOf': [
                {'type': 'null'},
                {
                    'type': 'object',
                    'required': ['kernel', 'support'],
                    'additionalProperties': False,
                    'properties': {
                        'kernel': {
                            'type': 'object',
                            'required': ['kind', 'gamma'],
                            'properties': {
                                'kind': {'enum': ['linear', 'rbf']},
                                'gamma': {'type': ['number', 'null']},
                            },
                        },
                        'support': {
                            'type': 'array',
                            'items': {
                                'type': 'object',
                                'required': ['features', 'alpha', 'y_tilde'],
                                'additionalProperties': False,
                                'properties': {
                                    'features': _NUMBER_LIST,
                                    'alpha': {'type': 'number', 'exclusiveMinimum': 0},
                                    'y_tilde': {'type': 'number', 'minimum': -1, 'maximum': 1},
                                },
                            },
                        },
                    },
                },
            ],
        },
        'bag_model': {
            'oneOf': [
                {'type': 'null'},
                {
                    'type': 'object',
                    'required': ['omega', 'k', 'xi_alpha', 'xi_beta', 'd_clamp'],
                    'additionalProperties': False,
                    'properties': {
                        'omega': _NUMBER_LIST,
                        'k': {'type': 'integer', 'minimum': 1},
                        'xi_alpha': {'type': 'number', 'exclusiveMinimum': 0},
                        'xi_beta': {'type': 'number'},
                        'd_clamp': {'type': 'number', 'exclusiveMinimum': 0},
                    },
                },
            ],
        },
    },
}


@dataclass(frozen=True)
class StoredModels:
    instance_model: Optional[InstanceModel] = None
    bag_model: Optional[BagModel] = None


def _floats(vector) -> list:
    return [float(v) for v in np.asarray(vector, dtype=float).ravel()]


def encode_instance_model(model: InstanceModel) -> dict:
    return {
        'kernel': model.kernel.to_dict(),
        'support': [
            {'features': _floats(features), 'alpha': float(alpha), 'y_tilde': float(y)}
            for features, alpha, y in zip(model.support, model.alpha, model.y_tilde)
        ],
    }


def encode_bag_model(model: BagModel) -> dict:
    return {
        'omega': _floats(model.omega),
        'k': int(model.k),
        'xi_alpha': float(model.weights.xi_alpha),
        'xi_beta': float(model.weights.xi_beta),
        'd_clamp': float(model.weights.d_clamp),
    }


def models_json(instance_model: Optional[InstanceModel] = None, bag_model: Optional[BagModel] = None) -> str:
    document = {
        'schema': SCHEMA_TAG,
        'instance_model': encode_instance_model(instance_model) if instance_model is not None else None,
        'bag_model': encode_bag_model(bag_model) if bag_model is not None else None,
    }
    return json.dumps(document, sort_keys=True, indent=2, allow_nan=False) + '\n'


def persist_models(path, instance_model: Optional[InstanceModel] = None,
                   bag_model: Optional[BagModel] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(models_json(instance_model, bag_model), encoding='utf-8')
    logger.info('models written to %s', path)
    return path


def _decode_instance_model(data: dict) -> InstanceModel:
    support = data['support']
    dims = {len(entry['features']) for entry in support}
    if len(dims) > 1:
        raise SchemaError('support vectors differ in dimension')
    features = np.array([entry['features'] for entry in support], dtype=float)
    if not support:
        features = np.zeros((0, 0))
    return InstanceModel(
        support=features,
        alpha=[entry['alpha'] for entry in support],
        y_tilde=[entry['y_tilde'] for entry in support],
        kernel=KernelSpec.from_dict(data['kernel']),
    )


def _decode_bag_model(data: dict) -> BagModel:
    return BagModel(
        omega=data['omega'],
        k=data['k'],
        weights=WeightParams(xi_alpha=data['xi_alpha'], xi_beta=data['xi_beta'], d_clamp=data['d_clamp']),
    )


def load_models(path) -> StoredModels:
    """
    Raises:
        ModelNotFound: no file at path
        SchemaVersionError: the schema tag is not curation.models/v1
        SchemaError: the document is not valid JSON or does not match the schema
    """
    path = Path(path)
    if not path.is_file():
        raise ModelNotFound(f'model file {path} not found')
    try:
        document = json.loads(path.read_text(encoding='utf-8'))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SchemaError(f'model file {path} is not valid JSON: {exc}') from exc
    if isinstance(document, dict) and 'schema' in document and document['schema'] != SCHEMA_TAG:
        raise SchemaVersionError(f'unsupported model schema {document["schema"]!r}, expected {SCHEMA_TAG!r}')
    try:
        jsonschema.validate(document, MODELS_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaError(f'model file {path} does not match the schema: {exc.message}') from exc

    try:
        instance_data, bag_data = document['instance_model'], document['bag_model']
        return StoredModels(
            instance_model=_decode_instance_model(instance_data) if instance_data is not None else None,
            bag_model=_decode_bag_model(bag_data) if bag_data is not None else None,
        )
    except SchemaError:
        raise
    except CurationError as exc:
        raise SchemaError(f'model file {path} holds an invalid model: {exc}') from exc
