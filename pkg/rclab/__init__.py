"""
rclab/__init__.py

    rclab - desk-scale reasoning curriculum laboratory: a tiny from-scratch policy model
    trained with cold-start SFT, math-only RL and joint RL over six synthetic domains
"""


# release.major_version.minor_version
__version__ = '0.4.0'


# TODO: roll_group regenerates the whole prefix for every new token. An incremental decode
#       path would cut rollout cost roughly by the response length, but it has to keep
#       old_logprobs bit-compatible with sequence_logprobs.
