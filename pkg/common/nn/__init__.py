from .init import xavier_uniform, embedding_normal
