"""JSON schemas for instance and game files.

Edge endpoints may be node indices or, when ``names`` is present, node names.
Node-mixture threshold vectors are ordered like the sorted in-neighbour list
of the node.
"""

ENDPOINT = {"type": ["integer", "string"]}

PROBABILITY = {"type": "number", "exclusiveMinimum": 0, "maximum": 1}

EDGE_CATEGORICAL = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "edges"],
    "properties": {
        "kind": {"const": "edge_categorical"},
        "edges": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["from", "to", "support"],
                "properties": {
                    "from": ENDPOINT,
                    "to": ENDPOINT,
                    "support": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["value", "prob"],
                            "properties": {
                                "value": {"type": "integer", "minimum": 0},
                                "prob": PROBABILITY,
                            },
                        },
                    },
                },
            },
        },
    },
}

NODE_MIXTURE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "nodes"],
    "properties": {
        "kind": {"const": "node_mixture"},
        "nodes": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["node", "mixture"],
                "properties": {
                    "node": ENDPOINT,
                    "mixture": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["prob", "thresholds"],
                            "properties": {
                                "prob": PROBABILITY,
                                "thresholds": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                            },
                        },
                    },
                },
            },
        },
    },
}

CLASSICAL = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "nodes"],
    "properties": {
        "kind": {"const": "classical"},
        "nodes": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["node", "subsets"],
                "properties": {
                    "node": ENDPOINT,
                    "subsets": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["prob", "members"],
                            "properties": {
                                "prob": PROBABILITY,
                                "members": {"type": "array", "items": ENDPOINT},
                            },
                        },
                    },
                },
            },
        },
    },
}

INSTANCE_PROPERTIES = {
    "n": {"type": "integer", "minimum": 1},
    "names": {"type": "array", "items": {"type": "string"}},
    "edges": {
        "type": "array",
        "items": {
            "type": "object",
            "additionalProperties": False,
            "required": ["from", "to"],
            "properties": {"from": ENDPOINT, "to": ENDPOINT},
        },
    },
    "budget": {"type": "integer", "minimum": 0},
    "capacities": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    "triggering": {"oneOf": [EDGE_CATEGORICAL, NODE_MIXTURE, CLASSICAL]},
}

INSTANCE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "Budgeted Triggering instance",
    "type": "object",
    "additionalProperties": False,
    "required": ["n", "edges", "budget", "capacities", "triggering"],
    "properties": INSTANCE_PROPERTIES,
}

DELAY = {
    "oneOf": [
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"const": "exponential"},
                "rate": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "low", "high"],
            "properties": {
                "kind": {"const": "uniform"},
                "low": {"type": "number", "minimum": 0},
                "high": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    ]
}

PLAYER = {
    "type": "object",
    "additionalProperties": False,
    "required": ["budget", "capacities"],
    "properties": {
        "budget": {"type": "integer", "minimum": 0},
        "capacities": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    },
}

GAME_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "Multi-player Budgeted Triggering game",
    "type": "object",
    "additionalProperties": False,
    "required": ["n", "edges", "budget", "capacities", "triggering", "players"],
    "properties": {
        **INSTANCE_PROPERTIES,
        "players": {"type": "array", "minItems": 1, "items": PLAYER},
        "delay": DELAY,
    },
}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "p_secretary": {"type": "number", "minimum": 0, "maximum": 1},
        "trials": {"type": "integer", "minimum": 1},
        "samples": {"type": "integer", "minimum": 1},
        "game_samples": {"type": "integer", "minimum": 1},
        "starts": {"type": "integer", "minimum": 1},
        "max_iters": {"type": "integer", "minimum": 0},
        "enum_depth": {"enum": [1, 2, 3]},
    },
}
