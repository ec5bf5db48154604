from .buffer import ReplayBuffer, joint_rows
from .discriminator import Discriminator, DiscriminatorConfig
from .sac import ActionMap, SacAgent, SacConfig, gaussian_tanh_sample
